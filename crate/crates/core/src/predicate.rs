//! The two predicates that guard every account update, and the pluggable
//! proof system that lets a prover convince others of the secret one.
//!
//! `eval_p_zk` is checked on secret inputs and only its proof travels;
//! `eval_p_a` is what every signer checks before contributing a share.
//!
//! Two proof backends:
//! - `Transparent` ships the secret inputs and verification re-runs
//!   `eval_p_zk`. Sound, not hiding; for debugging and cross-checks.
//! - `IdealZk` records `(prover, public inputs, random token)` in a
//!   run-scoped registry and ships only the token. Only `zkp_prove`, after a
//!   successful `eval_p_zk`, can add entries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cell::RefCell;

use num_bigint::BigUint;
use rand_core::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agreement::{ap_verify, AgreementProof, ApPredicate, Committee};
use crate::crypto::accumulator::{add_to_digest, is_empty, verify_mem, verify_non_mem};
use crate::crypto::{c_verify, CommitmentDigest, Element, GroupParams, MembershipProof, NonMembershipProof, Opening, PrimeCache};
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};
use crate::transfer::TransferDetails;
use crate::ProcessId;

/// Value an agreement proof certifies: accumulator digest and balance commitment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ApPayload {
    pub acc: Element,
    pub bal_c: CommitmentDigest,
}

impl Encode for ApPayload {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.acc).put(&self.bal_c);
    }
}

impl Decode for ApPayload {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ApPayload { acc: r.get()?, bal_c: r.get()? })
    }
}

/// Pre- and post-state of one update plus its sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicData {
    pub acc: Element,
    pub bal_c: CommitmentDigest,
    pub acc_next: Element,
    pub bal_c_next: CommitmentDigest,
    pub sn: u64,
}

impl PublicData {
    pub fn new(old: &ApPayload, new: &ApPayload, sn: u64) -> Self {
        PublicData { acc: old.acc.clone(), bal_c: old.bal_c, acc_next: new.acc.clone(), bal_c_next: new.bal_c, sn }
    }
}

impl Encode for PublicData {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.acc).put(&self.bal_c).put(&self.acc_next).put(&self.bal_c_next).u64(self.sn);
    }
}

impl Decode for PublicData {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(PublicData { acc: r.get()?, bal_c: r.get()?, acc_next: r.get()?, bal_c_next: r.get()?, sn: r.u64()? })
    }
}

/// What a receiver got from the sender; absent for sending and null updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenderArtifacts {
    pub acc: Element,
    pub bal_c: CommitmentDigest,
    pub proof: AgreementProof,
    pub witness: MembershipProof,
}

impl Encode for SenderArtifacts {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.acc).put(&self.bal_c).put(&self.proof).put(&self.witness);
    }
}

impl Decode for SenderArtifacts {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SenderArtifacts { acc: r.get()?, bal_c: r.get()?, proof: r.get()?, witness: r.get()? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretData {
    pub sender: Option<SenderArtifacts>,
    pub tau: TransferDetails,
    pub bal: BigUint,
    pub bal_o: Opening,
    pub bal_o_next: Opening,
    pub non_mem: NonMembershipProof,
}

impl Encode for SecretData {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.sender).put(&self.tau).biguint(&self.bal).put(&self.bal_o).put(&self.bal_o_next).put(&self.non_mem);
    }
}

impl Decode for SecretData {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SecretData {
            sender: r.get()?,
            tau: r.get()?,
            bal: r.biguint()?,
            bal_o: r.get()?,
            bal_o_next: r.get()?,
            non_mem: r.get()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Transparent,
    IdealZk,
}

impl Backend {
    fn tag(self) -> u8 {
        match self {
            Backend::Transparent => 1,
            Backend::IdealZk => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateProof {
    pub backend: Backend,
    pub payload: Vec<u8>,
}

impl Encode for PredicateProof {
    fn encode_to(&self, w: &mut Writer) {
        w.u8(self.backend.tag()).bytes(&self.payload);
    }
}

impl Decode for PredicateProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let backend = match r.u8()? {
            1 => Backend::Transparent,
            2 => Backend::IdealZk,
            t => return Err(DecodeError::UnknownTag(t)),
        };
        Ok(PredicateProof { backend, payload: r.bytes()?.to_vec() })
    }
}

/// The `data` argument of an agreement proof: previous proof, predicate
/// proof of the transition, and the previous payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApWitnessData {
    pub prev_proof: AgreementProof,
    pub proof: PredicateProof,
    pub old: ApPayload,
}

impl Encode for ApWitnessData {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.prev_proof).put(&self.proof).put(&self.old);
    }
}

impl Decode for ApWitnessData {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ApWitnessData { prev_proof: r.get()?, proof: r.get()?, old: r.get()? })
    }
}

/// Entries `(prover, hash of public inputs) -> tokens`.
#[derive(Debug, Default)]
pub struct ProofRegistry {
    entries: RefCell<BTreeMap<(ProcessId, [u8; 32]), BTreeSet<[u8; 32]>>>,
}

impl ProofRegistry {
    fn key(prover: ProcessId, public: &PublicData) -> (ProcessId, [u8; 32]) {
        (prover, Sha256::digest(public.to_bytes()).into())
    }

    fn insert(&self, prover: ProcessId, public: &PublicData, token: [u8; 32]) {
        self.entries.borrow_mut().entry(Self::key(prover, public)).or_default().insert(token);
    }

    pub fn contains(&self, prover: ProcessId, public: &PublicData, token: &[u8]) -> bool {
        let Ok(token) = <[u8; 32]>::try_from(token) else {
            return false;
        };
        self.entries.borrow().get(&Self::key(prover, public)).is_some_and(|s| s.contains(&token))
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Public parameters plus the run-scoped caches the predicates consult.
#[derive(Debug)]
pub struct Context {
    pub group: GroupParams,
    pub committee: Committee,
    /// Digest of each process's accumulator at setup.
    pub empty_digests: Vec<Element>,
    /// Shared between runs when the caller wants to reuse prime work.
    pub primes: Rc<PrimeCache>,
    registry: ProofRegistry,
}

impl Context {
    pub fn new(group: GroupParams, committee: Committee, empty_digests: Vec<Element>, primes: Rc<PrimeCache>) -> Self {
        Context { group, committee, empty_digests, primes, registry: ProofRegistry::default() }
    }

    pub fn n(&self) -> usize {
        self.committee.n()
    }

    pub fn registry(&self) -> &ProofRegistry {
        &self.registry
    }

    /// Prime representative of a transfer.
    pub fn tau_prime(&self, tau: &TransferDetails) -> Option<BigUint> {
        self.primes.prime(&tau.to_bytes()).ok()
    }
}

/// Checks a transition on its secret inputs. Total: malformed inputs give `false`.
pub fn eval_p_zk(ctx: &Context, public: &PublicData, secret: &SecretData, pvr: ProcessId) -> bool {
    let g = &ctx.group;
    let tau = &secret.tau;
    // the pre-state commitment opens to the claimed balance
    if !c_verify(&public.bal_c, &secret.bal, &secret.bal_o) {
        return false;
    }
    // tau is new to the accumulator and the post-state adds exactly tau
    let Some(x) = ctx.tau_prime(tau) else {
        return false;
    };
    if !verify_non_mem(g, &public.acc, &x, &secret.non_mem) {
        return false;
    }
    if add_to_digest(g, &public.acc, &x).as_ref() != Some(&public.acc_next) {
        return false;
    }
    if !ctx.committee.contains(tau.snd) || !ctx.committee.contains(tau.rcv) || tau.sn == 0 {
        return false;
    }
    if pvr == tau.snd && (tau.sn != public.sn || secret.bal < tau.v) {
        return false;
    }
    if pvr == tau.snd && pvr == tau.rcv {
        c_verify(&public.bal_c_next, &secret.bal, &secret.bal_o_next)
    } else if pvr == tau.snd {
        c_verify(&public.bal_c_next, &(&secret.bal - &tau.v), &secret.bal_o_next)
    } else if pvr == tau.rcv {
        let Some(s) = &secret.sender else {
            return false;
        };
        c_verify(&public.bal_c_next, &(&secret.bal + &tau.v), &secret.bal_o_next)
            && verify_mem(g, &s.acc, &x, &s.witness)
            && ap_verify(&ctx.committee, &s.proof, &ApPayload { acc: s.acc.clone(), bal_c: s.bal_c }.to_bytes(), tau.sn, tau.snd)
    } else {
        false
    }
}

/// Checks a proposed payload against the prover's previous certified state.
pub fn eval_p_a(ctx: &Context, value: &ApPayload, data: &ApWitnessData, sn: u64, pvr: ProcessId) -> bool {
    if sn == 0 || !ctx.committee.contains(pvr) {
        return false;
    }
    let public = PublicData::new(&data.old, value, sn);
    if !zkp_verify(ctx, &data.proof, &public, pvr) {
        return false;
    }
    if sn == 1 && !is_empty(&data.old.acc, &ctx.empty_digests[pvr as usize]) {
        return false;
    }
    ap_verify(&ctx.committee, &data.prev_proof, &data.old.to_bytes(), sn - 1, pvr)
}

/// [`eval_p_a`] on wire bytes.
pub struct AccountPredicate<'a>(pub &'a Context);

impl ApPredicate for AccountPredicate<'_> {
    fn holds(&self, value: &[u8], data: &[u8], sn: u64, prover: ProcessId) -> bool {
        let (Ok(value), Ok(data)) = (ApPayload::from_bytes(value), ApWitnessData::from_bytes(data)) else {
            return false;
        };
        eval_p_a(self.0, &value, &data, sn, prover)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredicateFalse;

pub fn zkp_prove<R: Rng + ?Sized>(
    ctx: &Context,
    backend: Backend,
    public: &PublicData,
    secret: &SecretData,
    pvr: ProcessId,
    rng: &mut R,
) -> Result<PredicateProof, PredicateFalse> {
    if !eval_p_zk(ctx, public, secret, pvr) {
        return Err(PredicateFalse);
    }
    let payload = match backend {
        Backend::Transparent => secret.to_bytes(),
        Backend::IdealZk => {
            let mut token = [0u8; 32];
            rng.fill_bytes(&mut token);
            ctx.registry.insert(pvr, public, token);
            token.to_vec()
        }
    };
    Ok(PredicateProof { backend, payload })
}

pub fn zkp_verify(ctx: &Context, proof: &PredicateProof, public: &PublicData, pvr: ProcessId) -> bool {
    match proof.backend {
        Backend::Transparent => match SecretData::from_bytes(&proof.payload) {
            Ok(secret) => eval_p_zk(ctx, public, &secret, pvr),
            Err(_) => false,
        },
        Backend::IdealZk => ctx.registry.contains(pvr, public, &proof.payload),
    }
}
