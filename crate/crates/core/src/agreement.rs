//! Multi-shot agreement proofs over a quorum of signers.
//!
//! A prover broadcasts `QuorumInit` for its next sequence number; every
//! process that accepts the predicate answers with a signature share once it
//! has answered all earlier sequence numbers of that prover, and the prover
//! aggregates `floor((n+t)/2) + 1` shares into a certificate. Two certificates
//! for one `(prover, sn)` would need two quorums, which intersect in a
//! correct process that answers each `(prover, sn)` once.
//!
//! Waiting is event driven: `prove` returns the message to broadcast and
//! `on_quorum_sig` returns the certificate when the threshold is crossed.
//! Out-of-order inits wait in a bounded per-prover buffer.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::crypto::{sig_aggregate, sig_share, sig_verify, signature::share_valid, PublicKey, QuorumSignature, SecretKey, Share};
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};
use crate::ProcessId;

/// Default number of buffered out-of-order inits kept per prover.
pub const DEFAULT_DEFERRED_CAP: usize = 64;

pub fn quorum_threshold(n: usize, t: usize) -> usize {
    (n + t) / 2 + 1
}

/// Public keys of all processes plus the fault bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Committee {
    pub keys: Vec<PublicKey>,
    pub t: usize,
}

impl Committee {
    pub fn n(&self) -> usize {
        self.keys.len()
    }

    pub fn threshold(&self) -> usize {
        quorum_threshold(self.n(), self.t)
    }

    pub fn contains(&self, id: ProcessId) -> bool {
        (id as usize) < self.n()
    }
}

/// Message signed by the share holders: `(value, sn, prover)`.
pub fn ap_tag(value: &[u8], sn: u64, prover: ProcessId) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(b"qaat/ap/v1").bytes(value).u64(sn).u32(prover);
    w.finish()
}

fn init_tag(value: &[u8], data: &[u8], sn: u64, prover: ProcessId) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(b"qaat/init/v1").bytes(value).bytes(data).u64(sn).u32(prover);
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgreementProof {
    pub cert: QuorumSignature,
}

impl Encode for AgreementProof {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.cert);
    }
}

impl Decode for AgreementProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(AgreementProof { cert: r.get()? })
    }
}

pub fn ap_verify(committee: &Committee, proof: &AgreementProof, value: &[u8], sn: u64, prover: ProcessId) -> bool {
    committee.contains(prover) && sig_verify(&committee.keys, &proof.cert, &ap_tag(value, sn, prover), committee.threshold())
}

/// Builds a certificate directly from shares. Setup uses this for the
/// sequence-number-zero proofs; adversary scripts use it for their own
/// share collections.
pub fn ap_aggregate(
    committee: &Committee,
    value: &[u8],
    sn: u64,
    prover: ProcessId,
    shares: &[(ProcessId, Share)],
) -> Option<AgreementProof> {
    sig_aggregate(&committee.keys, &ap_tag(value, sn, prover), shares, committee.threshold())
        .ok()
        .map(|cert| AgreementProof { cert })
}

pub fn ap_share(key: &SecretKey, value: &[u8], sn: u64, prover: ProcessId) -> Share {
    sig_share(key, &ap_tag(value, sn, prover))
}

pub fn init_signature(key: &SecretKey, value: &[u8], data: &[u8], sn: u64, prover: ProcessId) -> Share {
    sig_share(key, &init_tag(value, data, sn, prover))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuorumInit {
    pub value: Vec<u8>,
    pub data: Vec<u8>,
    pub sn: u64,
    pub prover: ProcessId,
    pub init_sig: Share,
}

impl QuorumInit {
    pub fn init_sig_valid(&self, committee: &Committee) -> bool {
        committee.contains(self.prover)
            && share_valid(
                &committee.keys[self.prover as usize],
                &init_tag(&self.value, &self.data, self.sn, self.prover),
                &self.init_sig,
            )
    }
}

impl Encode for QuorumInit {
    fn encode_to(&self, w: &mut Writer) {
        w.bytes(&self.value).bytes(&self.data).u64(self.sn).u32(self.prover).put(&self.init_sig);
    }
}

impl Decode for QuorumInit {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(QuorumInit {
            value: r.bytes()?.to_vec(),
            data: r.bytes()?.to_vec(),
            sn: r.u64()?,
            prover: r.u32()?,
            init_sig: r.get()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuorumSig {
    pub signer: ProcessId,
    pub share: Share,
}

impl Encode for QuorumSig {
    fn encode_to(&self, w: &mut Writer) {
        w.u32(self.signer).put(&self.share);
    }
}

impl Decode for QuorumSig {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(QuorumSig { signer: r.u32()?, share: r.get()? })
    }
}

/// The predicate a proof certifies, evaluated on raw payload bytes.
pub trait ApPredicate {
    fn holds(&self, value: &[u8], data: &[u8], sn: u64, prover: ProcessId) -> bool;
}

impl<F: Fn(&[u8], &[u8], u64, ProcessId) -> bool> ApPredicate for F {
    fn holds(&self, value: &[u8], data: &[u8], sn: u64, prover: ProcessId) -> bool {
        self(value, data, sn, prover)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProveAborted;

/// A share this process sent in answer to someone's init.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub prover: ProcessId,
    pub sn: u64,
    pub reply: QuorumSig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub proof: AgreementProof,
    pub value: Vec<u8>,
    pub sn: u64,
}

/// Why an incoming message was not acted on. Diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dropped {
    UnknownProcess,
    BadInitSignature,
    StaleSequence,
    PredicateFalse,
    NoPendingProve,
    BadShare,
    DuplicateSigner,
}

#[derive(Debug, Clone)]
pub struct ApState {
    me: ProcessId,
    seq_nums: Vec<u64>,
    sigs: BTreeMap<ProcessId, Share>,
    pending: Option<(Vec<u8>, u64)>,
    deferred: Vec<VecDeque<QuorumInit>>,
    deferred_cap: usize,
    skip_gate: bool,
}

impl ApState {
    pub fn new(me: ProcessId, n: usize, deferred_cap: usize) -> Self {
        ApState {
            me,
            seq_nums: alloc::vec![0; n],
            sigs: BTreeMap::new(),
            pending: None,
            deferred: (0..n).map(|_| VecDeque::new()).collect(),
            deferred_cap: deferred_cap.max(1),
            skip_gate: false,
        }
    }

    /// Answers every valid init immediately, ignoring sequence order.
    /// Breaks agreement; exists only so negative fixtures can show the
    /// checkers catching the result.
    pub fn disable_fifo_gate(&mut self) {
        self.skip_gate = true;
    }

    pub fn seq_nums(&self) -> &[u64] {
        &self.seq_nums
    }

    /// Sequence number the next `prove` will use.
    pub fn next_sn(&self) -> u64 {
        self.seq_nums[self.me as usize] + 1
    }

    pub fn in_flight(&self) -> bool {
        self.pending.is_some()
    }

    pub fn collected(&self) -> usize {
        self.sigs.len()
    }

    pub fn deferred_len(&self, prover: ProcessId) -> usize {
        self.deferred.get(prover as usize).map_or(0, VecDeque::len)
    }

    /// Starts a prove for the next sequence number. On success the caller
    /// broadcasts the returned init; on abort nothing is sent.
    pub fn prove<P: ApPredicate + ?Sized>(
        &mut self,
        key: &SecretKey,
        value: Vec<u8>,
        data: Vec<u8>,
        pred: &P,
    ) -> Result<QuorumInit, ProveAborted> {
        assert!(!self.in_flight(), "one prove at a time");
        let sn = self.next_sn();
        if !pred.holds(&value, &data, sn, self.me) {
            return Err(ProveAborted);
        }
        let init_sig = init_signature(key, &value, &data, sn, self.me);
        self.sigs.clear();
        self.pending = Some((value.clone(), sn));
        Ok(QuorumInit { value, data, sn, prover: self.me, init_sig })
    }

    pub fn on_quorum_init<P: ApPredicate + ?Sized>(
        &mut self,
        committee: &Committee,
        key: &SecretKey,
        msg: QuorumInit,
        pred: &P,
    ) -> Result<Vec<Answer>, Dropped> {
        let j = msg.prover as usize;
        if !committee.contains(msg.prover) || j >= self.seq_nums.len() {
            return Err(Dropped::UnknownProcess);
        }
        if msg.sn <= self.seq_nums[j] && !self.skip_gate {
            return Err(Dropped::StaleSequence);
        }
        if !msg.init_sig_valid(committee) {
            return Err(Dropped::BadInitSignature);
        }
        if !pred.holds(&msg.value, &msg.data, msg.sn, msg.prover) {
            return Err(Dropped::PredicateFalse);
        }
        if self.skip_gate {
            self.seq_nums[j] = self.seq_nums[j].max(msg.sn);
            return Ok(alloc::vec![self.answer(key, &msg)]);
        }
        let q = &mut self.deferred[j];
        if q.len() == self.deferred_cap {
            q.pop_front();
        }
        q.push_back(msg);
        Ok(self.release(key, j))
    }

    fn answer(&self, key: &SecretKey, msg: &QuorumInit) -> Answer {
        let share = ap_share(key, &msg.value, msg.sn, msg.prover);
        Answer { prover: msg.prover, sn: msg.sn, reply: QuorumSig { signer: self.me, share } }
    }

    /// Answers buffered inits of prover `j` while the next one is present.
    fn release(&mut self, key: &SecretKey, j: usize) -> Vec<Answer> {
        let mut out = Vec::new();
        loop {
            let want = self.seq_nums[j] + 1;
            let q = &mut self.deferred[j];
            q.retain(|m| m.sn >= want);
            let Some(pos) = q.iter().position(|m| m.sn == want) else {
                break;
            };
            let msg = q.remove(pos).expect("index from position");
            out.push(self.answer(key, &msg));
            self.seq_nums[j] = want;
        }
        out
    }

    pub fn on_quorum_sig(&mut self, committee: &Committee, msg: QuorumSig) -> Result<Option<Resolved>, Dropped> {
        let Some((value, sn)) = &self.pending else {
            return Err(Dropped::NoPendingProve);
        };
        if !committee.contains(msg.signer) {
            return Err(Dropped::UnknownProcess);
        }
        let tag = ap_tag(value, *sn, self.me);
        if !share_valid(&committee.keys[msg.signer as usize], &tag, &msg.share) {
            return Err(Dropped::BadShare);
        }
        if self.sigs.contains_key(&msg.signer) {
            return Err(Dropped::DuplicateSigner);
        }
        self.sigs.insert(msg.signer, msg.share);
        if self.sigs.len() < committee.threshold() {
            return Ok(None);
        }
        let shares: Vec<_> = self.sigs.iter().map(|(&i, &s)| (i, s)).collect();
        let cert = sig_aggregate(&committee.keys, &tag, &shares, committee.threshold())
            .expect("shares were checked on arrival");
        let (value, sn) = self.pending.take().expect("checked above");
        self.sigs.clear();
        Ok(Some(Resolved { proof: AgreementProof { cert }, value, sn }))
    }

    /// Serialized size of the persistent part (sequence numbers).
    pub fn encode_persistent(&self, w: &mut Writer) {
        w.u32(self.me).u32(self.seq_nums.len() as u32);
        for &s in &self.seq_nums {
            w.u64(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn setup(n: usize, t: usize) -> (Committee, Vec<SecretKey>) {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let sks: Vec<_> = (0..n).map(|_| SecretKey::generate(&mut rng)).collect();
        (Committee { keys: sks.iter().map(|k| k.public()).collect(), t }, sks)
    }

    fn yes(_: &[u8], _: &[u8], _: u64, _: ProcessId) -> bool {
        true
    }

    fn no(_: &[u8], _: &[u8], _: u64, _: ProcessId) -> bool {
        false
    }

    #[test]
    fn threshold_values() {
        assert_eq!(quorum_threshold(4, 1), 3);
        assert_eq!(quorum_threshold(7, 2), 5);
        assert_eq!(quorum_threshold(10, 3), 7);
        assert_eq!(quorum_threshold(13, 4), 9);
    }

    #[test]
    fn round_trip_with_one_silent() {
        let (c, sks) = setup(4, 1);
        let mut states: Vec<_> = (0..4).map(|i| ApState::new(i, 4, 8)).collect();
        let init = states[0].prove(&sks[0], b"v".to_vec(), b"d".to_vec(), &yes).unwrap();
        assert_eq!(init.sn, 1);
        let mut resolved = None;
        for i in 0..3 {
            let ans = states[i].on_quorum_init(&c, &sks[i], init.clone(), &yes).unwrap();
            assert_eq!(ans.len(), 1);
            if let Some(r) = states[0].on_quorum_sig(&c, ans[0].reply).unwrap() {
                resolved = Some(r);
            }
        }
        let r = resolved.expect("three shares reach the threshold");
        assert!(ap_verify(&c, &r.proof, b"v", 1, 0));
        assert!(!ap_verify(&c, &r.proof, b"w", 1, 0));
        assert!(!ap_verify(&c, &r.proof, b"v", 2, 0));
        assert!(!states[0].in_flight());
        assert_eq!(states[1].seq_nums()[0], 1);
    }

    #[test]
    fn predicate_false_aborts_without_sequence_change() {
        let (_, sks) = setup(4, 1);
        let mut s = ApState::new(0, 4, 8);
        assert_eq!(s.prove(&sks[0], b"v".to_vec(), b"d".to_vec(), &no), Err(ProveAborted));
        assert_eq!(s.next_sn(), 1);
        assert!(!s.in_flight());
    }

    #[test]
    fn out_of_order_init_is_buffered() {
        let (c, sks) = setup(4, 1);
        let mut p = ApState::new(0, 4, 8);
        let i1 = p.prove(&sks[0], b"a".to_vec(), b"".to_vec(), &yes).unwrap();
        let mut q = ApState::new(1, 4, 8);
        let mut i2 = i1.clone();
        i2.sn = 2;
        i2.value = b"b".to_vec();
        i2.init_sig = init_signature(&sks[0], &i2.value, &i2.data, 2, 0);
        assert!(q.on_quorum_init(&c, &sks[1], i2, &yes).unwrap().is_empty());
        assert_eq!(q.deferred_len(0), 1);
        let ans = q.on_quorum_init(&c, &sks[1], i1, &yes).unwrap();
        assert_eq!(ans.iter().map(|a| a.sn).collect::<Vec<_>>(), [1, 2]);
        assert_eq!(q.seq_nums()[0], 2);
    }

    #[test]
    fn equivocation_answered_once() {
        let (c, sks) = setup(4, 1);
        let a = QuorumInit { value: b"a".to_vec(), data: vec![], sn: 1, prover: 3, init_sig: init_signature(&sks[3], b"a", b"", 1, 3) };
        let b = QuorumInit { value: b"b".to_vec(), data: vec![], sn: 1, prover: 3, init_sig: init_signature(&sks[3], b"b", b"", 1, 3) };
        let mut q = ApState::new(0, 4, 8);
        assert_eq!(q.on_quorum_init(&c, &sks[0], a, &yes).unwrap().len(), 1);
        assert_eq!(q.on_quorum_init(&c, &sks[0], b, &yes), Err(Dropped::StaleSequence));
    }

    #[test]
    fn duplicate_and_stale_shares_ignored() {
        let (c, sks) = setup(4, 1);
        let mut p = ApState::new(0, 4, 8);
        p.prove(&sks[0], b"v".to_vec(), vec![], &yes).unwrap();
        let s1 = QuorumSig { signer: 1, share: ap_share(&sks[1], b"v", 1, 0) };
        assert_eq!(p.on_quorum_sig(&c, s1), Ok(None));
        assert_eq!(p.on_quorum_sig(&c, s1), Err(Dropped::DuplicateSigner));
        assert_eq!(p.collected(), 1);
        let stale = QuorumSig { signer: 2, share: ap_share(&sks[2], b"old", 1, 0) };
        assert_eq!(p.on_quorum_sig(&c, stale), Err(Dropped::BadShare));
    }

    #[test]
    fn deferred_buffer_drops_oldest() {
        let (c, sks) = setup(4, 1);
        let mut q = ApState::new(0, 4, 2);
        for sn in [5u64, 6, 7] {
            let m = QuorumInit { value: vec![1], data: vec![], sn, prover: 2, init_sig: init_signature(&sks[2], &[1], &[], sn, 2) };
            q.on_quorum_init(&c, &sks[0], m, &yes).unwrap();
        }
        assert_eq!(q.deferred_len(2), 2);
    }

    #[test]
    fn garbage_prover_rejected() {
        let (c, sks) = setup(4, 1);
        let mut q = ApState::new(0, 4, 2);
        let m = QuorumInit { value: vec![], data: vec![], sn: 1, prover: 99, init_sig: Share([0; 64]) };
        assert_eq!(q.on_quorum_init(&c, &sks[0], m, &yes), Err(Dropped::UnknownProcess));
    }
}
