//! The per-process account state machine.
//!
//! An account is sequential: at most one update (send, receive or null
//! transfer) is in flight, waiting for its agreement proof. Operations and
//! incoming transfer notices queue behind it. Every entry point returns the
//! [`Effect`]s the caller must carry out (network sends) or record (results,
//! installed updates).

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_chacha::ChaCha20Rng;
use rand_core::Rng;

use crate::agreement::{ap_verify, AgreementProof, ApState, Dropped, ProveAborted};
use crate::crypto::accumulator::verify_mem;
use crate::crypto::{c_commit, Accumulator, CommitmentDigest, KeyOpening, MembershipProof, Opening, SecretKey};
use crate::encoding::{Decode, Encode, Writer};
use crate::predicate::{zkp_prove, AccountPredicate, ApPayload, ApWitnessData, Backend, Context, PublicData, SecretData, SenderArtifacts};
use crate::setup::ProcessKit;
use crate::transfer::TransferDetails;
use crate::wire::{TransferMessage, WireMessage};
use crate::ProcessId;

/// Certified local state.
#[derive(Debug, Clone)]
pub struct ProcessState {
    pub id: ProcessId,
    pub bal: BigUint,
    pub sn: u64,
    pub bal_c: CommitmentDigest,
    pub bal_o: Opening,
    pub transfers: Vec<TransferDetails>,
    pub acc: Accumulator,
    pub proof: AgreementProof,
}

impl ProcessState {
    pub fn payload(&self, ctx: &Context) -> ApPayload {
        ApPayload { acc: self.acc.digest(&ctx.group), bal_c: self.bal_c }
    }

    pub fn encode_to(&self, ctx: &Context, w: &mut Writer) {
        w.u32(self.id).biguint(&self.bal).u64(self.sn).put(&self.bal_c).put(&self.bal_o);
        w.u32(self.transfers.len() as u32);
        for t in &self.transfers {
            w.put(t);
        }
        w.put(&self.acc.digest(&ctx.group));
        w.biguint(self.acc.blinding().unwrap_or(&BigUint::default()));
        w.u32(self.acc.len() as u32);
        for p in self.acc.primes() {
            w.biguint(p);
        }
        w.put(&self.proof);
    }

    /// Re-checks the state invariants against public parameters.
    pub fn check_invariants(&self, ctx: &Context, init: &BigUint) -> Result<(), &'static str> {
        if !crate::crypto::c_verify(&self.bal_c, &self.bal, &self.bal_o) {
            return Err("balance commitment does not open");
        }
        if self.transfers.len() != self.acc.len() || self.sn as usize != self.transfers.len() {
            return Err("transfer set, accumulator and sequence number disagree");
        }
        for (t, p) in self.transfers.iter().zip(self.acc.primes()) {
            if ctx.tau_prime(t).as_ref() != Some(p) {
                return Err("accumulated prime does not match transfer");
            }
        }
        if !ap_verify(&ctx.committee, &self.proof, &self.payload(ctx).to_bytes(), self.sn, self.id) {
            return Err("latest proof does not verify");
        }
        let mut bal = init.clone();
        for t in &self.transfers {
            if t.rcv == self.id {
                bal += &t.v;
            }
            if t.snd == self.id {
                if bal < t.v {
                    return Err("overdraft in transfer history");
                }
                bal -= &t.v;
            }
        }
        if bal != self.bal {
            return Err("balance differs from transfer history");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Sender,
    Receiver,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateError {
    NotParty,
    InsufficientFunds,
    /// Transfer already accumulated.
    Duplicate,
    PredicateFalse,
    HashFailure,
}

/// A computed transition waiting for its agreement proof.
#[derive(Debug, Clone)]
pub struct PreparedUpdate {
    pub tau: TransferDetails,
    pub role: Role,
    pub sn: u64,
    pub bal: BigUint,
    pub bal_c: CommitmentDigest,
    pub bal_o: Opening,
    pub acc: Accumulator,
    /// Membership witness for `tau` in the new accumulator.
    pub witness: MembershipProof,
    pub payload: ApPayload,
    pub data: ApWitnessData,
}

/// Computes the next state for `tau` and proves the transition.
pub fn prepare_update<R: Rng + ?Sized>(
    ctx: &Context,
    backend: Backend,
    state: &ProcessState,
    tau: &TransferDetails,
    sender: Option<SenderArtifacts>,
    rng: &mut R,
) -> Result<PreparedUpdate, UpdateError> {
    let me = state.id;
    let (role, bal) = if tau.snd == me && tau.rcv == me {
        (Role::Null, state.bal.clone())
    } else if tau.snd == me {
        if state.bal < tau.v {
            return Err(UpdateError::InsufficientFunds);
        }
        (Role::Sender, &state.bal - &tau.v)
    } else if tau.rcv == me {
        (Role::Receiver, &state.bal + &tau.v)
    } else {
        return Err(UpdateError::NotParty);
    };
    let (bal_c, bal_o) = c_commit(&bal, rng);
    let x = ctx.tau_prime(tau).ok_or(UpdateError::HashFailure)?;
    let non_mem = state.acc.prove_non_mem_prime(&ctx.group, &x).ok_or(UpdateError::Duplicate)?;
    let (acc, witness) = state.acc.add_prime(&ctx.group, &x).map_err(|_| UpdateError::Duplicate)?;
    let old = state.payload(ctx);
    let payload = ApPayload { acc: acc.digest(&ctx.group), bal_c };
    let sn = state.sn + 1;
    let public = PublicData::new(&old, &payload, sn);
    let secret = SecretData { sender, tau: tau.clone(), bal: state.bal.clone(), bal_o: state.bal_o, bal_o_next: bal_o, non_mem };
    let proof = zkp_prove(ctx, backend, &public, &secret, me, rng).map_err(|_| UpdateError::PredicateFalse)?;
    let data = ApWitnessData { prev_proof: state.proof.clone(), proof, old };
    Ok(PreparedUpdate { tau: tau.clone(), role, sn, bal, bal_c, bal_o, acc, witness, payload, data })
}

impl ProcessState {
    pub fn install(&mut self, u: PreparedUpdate, proof: AgreementProof) {
        self.sn = u.sn;
        self.acc = u.acc;
        self.bal = u.bal;
        self.bal_c = u.bal_c;
        self.bal_o = u.bal_o;
        self.transfers.push(u.tau);
        self.proof = proof;
    }
}

pub type OpId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    Transfer { to: ProcessId, amount: BigUint },
    Balance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpResult {
    Commit,
    Abort,
    Balance(BigUint),
}

/// An update that just received its proof.
#[derive(Debug, Clone)]
pub struct Installed {
    pub issuer: ProcessId,
    pub sn: u64,
    pub tau: TransferDetails,
    pub role: Role,
    pub payload: ApPayload,
    /// Payload this update replaced.
    pub prev: ApPayload,
    pub proof: AgreementProof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ignored {
    Undecodable,
    Ap(Dropped),
    /// Transfer notice whose receiver, witness or proof check failed.
    TransferGuard,
    /// Transfer already in this account's set.
    DuplicateTransfer,
}

#[derive(Debug, Clone)]
pub enum Effect {
    Broadcast(Vec<u8>),
    Send(ProcessId, Vec<u8>),
    RaSend(ProcessId, Vec<u8>),
    Completed { op: OpId, result: OpResult },
    Installed(Installed),
    /// Share sent for `(prover, sn)`.
    Answered { prover: ProcessId, sn: u64 },
    Ignored(Ignored),
    /// Internal invariant broke; the account stops.
    Halted(&'static str),
}

#[derive(Debug, Clone)]
struct InFlight {
    update: PreparedUpdate,
    op: Option<OpId>,
}

#[derive(Debug, Clone)]
pub struct Account {
    state: ProcessState,
    ap: ApState,
    key: SecretKey,
    key_opening: KeyOpening,
    directory_root: [u8; 32],
    backend: Backend,
    rng: ChaCha20Rng,
    busy: Option<InFlight>,
    ops: VecDeque<(OpId, Operation)>,
    inbox: VecDeque<TransferMessage>,
    halted: bool,
}

impl Account {
    pub fn new(kit: ProcessKit, n: usize, directory_root: [u8; 32], backend: Backend, deferred_cap: usize, rng: ChaCha20Rng) -> Self {
        let id = kit.state.id;
        Account {
            state: kit.state,
            ap: ApState::new(id, n, deferred_cap),
            key: kit.key,
            key_opening: kit.key_opening,
            directory_root,
            backend,
            rng,
            busy: None,
            ops: VecDeque::new(),
            inbox: VecDeque::new(),
            halted: false,
        }
    }

    pub fn id(&self) -> ProcessId {
        self.state.id
    }

    pub fn state(&self) -> &ProcessState {
        &self.state
    }

    pub fn ap(&self) -> &ApState {
        &self.ap
    }

    pub fn ap_mut(&mut self) -> &mut ApState {
        &mut self.ap
    }

    pub fn key(&self) -> &SecretKey {
        &self.key
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// No update in flight and no queued work.
    pub fn is_idle(&self) -> bool {
        self.busy.is_none() && self.ops.is_empty() && self.inbox.is_empty()
    }

    pub fn balance(&self) -> &BigUint {
        &self.state.bal
    }

    /// Bytes of persistent state: certified state, peer sequence numbers and key material.
    pub fn storage_bytes(&self, ctx: &Context) -> Vec<u8> {
        let mut w = Writer::new();
        self.state.encode_to(ctx, &mut w);
        self.ap.encode_persistent(&mut w);
        w.raw(&self.key.to_bytes()).put(&self.key.public()).put(&self.key_opening).raw(&self.directory_root);
        w.finish()
    }

    pub fn invoke(&mut self, ctx: &Context, op: OpId, operation: Operation) -> Vec<Effect> {
        let mut out = Vec::new();
        if self.halted {
            return out;
        }
        self.ops.push_back((op, operation));
        self.pump(ctx, &mut out);
        out
    }

    pub fn deliver(&mut self, ctx: &Context, bytes: &[u8]) -> Vec<Effect> {
        let mut out = Vec::new();
        if self.halted {
            return out;
        }
        match WireMessage::from_bytes(bytes) {
            Err(_) => out.push(Effect::Ignored(Ignored::Undecodable)),
            Ok(WireMessage::Init(m)) => self.on_init(ctx, m, &mut out),
            Ok(WireMessage::Sig(m)) => match self.ap.on_quorum_sig(&ctx.committee, m) {
                Err(d) => out.push(Effect::Ignored(Ignored::Ap(d))),
                Ok(None) => {}
                Ok(Some(r)) => self.finish_update(r.proof, r.sn, &mut out),
            },
            Ok(WireMessage::Transfer(m)) => self.on_transfer(ctx, m, &mut out),
        }
        self.pump(ctx, &mut out);
        out
    }

    fn on_init(&mut self, ctx: &Context, m: crate::agreement::QuorumInit, out: &mut Vec<Effect>) {
        match self.ap.on_quorum_init(&ctx.committee, &self.key, m, &AccountPredicate(ctx)) {
            Err(d) => out.push(Effect::Ignored(Ignored::Ap(d))),
            Ok(answers) => {
                for a in answers {
                    out.push(Effect::Answered { prover: a.prover, sn: a.sn });
                    out.push(Effect::Send(a.prover, WireMessage::Sig(a.reply).encode()));
                }
            }
        }
    }

    fn on_transfer(&mut self, ctx: &Context, m: TransferMessage, out: &mut Vec<Effect>) {
        let tau = &m.tau;
        let ok = tau.rcv == self.state.id
            && ctx.tau_prime(tau).is_some_and(|x| verify_mem(&ctx.group, &m.acc, &x, &m.witness))
            && ap_verify(&ctx.committee, &m.proof, &ApPayload { acc: m.acc.clone(), bal_c: m.bal_c }.to_bytes(), tau.sn, tau.snd);
        if !ok {
            out.push(Effect::Ignored(Ignored::TransferGuard));
        } else if self.inbox.iter().any(|q| q.tau == m.tau) {
            out.push(Effect::Ignored(Ignored::DuplicateTransfer));
        } else {
            self.inbox.push_back(m);
        }
    }

    /// Starts queued work while the account is free. The account also waits
    /// until it has answered its own last init, so the next prove picks up
    /// the right sequence number.
    fn pump(&mut self, ctx: &Context, out: &mut Vec<Effect>) {
        while !self.halted && self.busy.is_none() && self.ap.seq_nums()[self.state.id as usize] == self.state.sn {
            if let Some(m) = self.inbox.pop_front() {
                let started = match prepare_update(ctx, self.backend, &self.state, &m.tau, Some(m.artifacts()), &mut self.rng) {
                    Ok(u) => self.start(ctx, u, None, out),
                    Err(UpdateError::Duplicate) => {
                        out.push(Effect::Ignored(Ignored::DuplicateTransfer));
                        false
                    }
                    Err(_) => {
                        self.halt("receive update failed", out);
                        false
                    }
                };
                if started {
                    return;
                }
                continue;
            }
            let Some((op, operation)) = self.ops.pop_front() else {
                return;
            };
            match operation {
                Operation::Balance => out.push(Effect::Completed { op, result: OpResult::Balance(self.state.bal.clone()) }),
                Operation::Transfer { to, amount } => {
                    if amount > self.state.bal || !ctx.committee.contains(to) {
                        out.push(Effect::Completed { op, result: OpResult::Abort });
                        continue;
                    }
                    let tau = TransferDetails { snd: self.state.id, v: amount, rcv: to, sn: self.state.sn + 1 };
                    match prepare_update(ctx, self.backend, &self.state, &tau, None, &mut self.rng) {
                        Ok(u) => {
                            if self.start(ctx, u, Some(op), out) {
                                return;
                            }
                        }
                        Err(_) => self.halt("send update failed", out),
                    }
                }
            }
        }
    }

    fn start(&mut self, ctx: &Context, update: PreparedUpdate, op: Option<OpId>, out: &mut Vec<Effect>) -> bool {
        let value = update.payload.to_bytes();
        let data = update.data.to_bytes();
        match self.ap.prove(&self.key, value, data, &AccountPredicate(ctx)) {
            Ok(init) => {
                debug_assert_eq!(init.sn, update.sn);
                out.push(Effect::Broadcast(WireMessage::Init(init).encode()));
                self.busy = Some(InFlight { update, op });
                true
            }
            Err(ProveAborted) => {
                self.halt("own update rejected by the agreement predicate", out);
                false
            }
        }
    }

    fn finish_update(&mut self, proof: AgreementProof, sn: u64, out: &mut Vec<Effect>) {
        let Some(InFlight { update, op }) = self.busy.take() else {
            self.halt("proof resolved with nothing in flight", out);
            return;
        };
        debug_assert_eq!(sn, update.sn);
        let tau = update.tau.clone();
        let role = update.role;
        let payload = update.payload.clone();
        let witness = update.witness.clone();
        let prev = update.data.old.clone();
        self.state.install(update, proof.clone());
        out.push(Effect::Installed(Installed { issuer: self.state.id, sn, tau: tau.clone(), role, payload: payload.clone(), prev, proof: proof.clone() }));
        if role != Role::Receiver {
            let msg = TransferMessage { tau: tau.clone(), proof, acc: payload.acc, witness, bal_c: payload.bal_c };
            out.push(Effect::RaSend(tau.rcv, WireMessage::Transfer(msg).encode()));
            if let Some(op) = op {
                out.push(Effect::Completed { op, result: OpResult::Commit });
            }
        }
    }

    fn halt(&mut self, why: &'static str, out: &mut Vec<Effect>) {
        self.halted = true;
        out.push(Effect::Halted(why));
    }

}
