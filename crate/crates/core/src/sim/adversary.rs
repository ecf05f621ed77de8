//! Scripted Byzantine processes.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::Rng;

use super::scenario::ByzScript;
use super::Certificate;
use super::trace::{Channel, Digest32, EventKind, RoleRecord, TauRecord, UpdateRecord};
use crate::account::{prepare_update, Account, Effect, OpId, Operation, PreparedUpdate};
use crate::agreement::{ap_aggregate, ap_share, init_signature, AgreementProof, QuorumInit, QuorumSig};
use crate::crypto::signature::share_valid;
use crate::crypto::Share;
use crate::encoding::{Decode, Encode};
use crate::predicate::Context;
use crate::transfer::TransferDetails;
use crate::wire::{TransferMessage, WireMessage};
use crate::ProcessId;

#[derive(Debug, Clone)]
pub struct Outgoing {
    pub channel: Channel,
    pub dst: ProcessId,
    pub bytes: Vec<u8>,
}

#[derive(Debug)]
struct Branch {
    update: PreparedUpdate,
    value: Vec<u8>,
    tag: Vec<u8>,
    shares: Vec<(ProcessId, Share)>,
    proof: Option<AgreementProof>,
}

#[derive(Debug)]
struct Equivocation {
    branches: [Branch; 2],
    notices_sent: bool,
}

/// What a Byzantine process did in response to one input.
#[derive(Debug, Default)]
pub struct AgentOutput {
    /// Effects of the honest code underneath; not subject to the injection cap.
    pub effects: Vec<Effect>,
    pub events: Vec<EventKind>,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug)]
pub struct Agent {
    id: ProcessId,
    script: ByzScript,
    inner: Account,
    rng: ChaCha20Rng,
    colluders: BTreeSet<ProcessId>,
    outbox: VecDeque<Outgoing>,
    equivocation: Option<Equivocation>,
    fired: bool,
}

impl Agent {
    pub fn new(script: ByzScript, inner: Account, rng: ChaCha20Rng, colluders: BTreeSet<ProcessId>) -> Self {
        Agent { id: inner.id(), script, inner, rng, colluders, outbox: VecDeque::new(), equivocation: None, fired: false }
    }

    pub fn account(&self) -> &Account {
        &self.inner
    }

    fn silent(&self) -> bool {
        matches!(self.script, ByzScript::Silent)
    }

    fn signs_all(&self) -> bool {
        matches!(self.script, ByzScript::SignAll | ByzScript::Equivocate { sign_all: true, .. })
    }

    pub fn invoke(&mut self, ctx: &Context, op: OpId, operation: Operation) -> AgentOutput {
        if self.silent() {
            return AgentOutput::default();
        }
        let effects = self.inner.invoke(ctx, op, operation);
        self.filter(effects)
    }

    pub fn deliver(&mut self, ctx: &Context, bytes: &[u8]) -> AgentOutput {
        if self.silent() {
            return AgentOutput::default();
        }
        let mut out = AgentOutput::default();
        match WireMessage::from_bytes(bytes) {
            Ok(WireMessage::Sig(sig)) if self.equivocation_wants(ctx, &sig) => {
                self.collect(ctx, sig, &mut out);
                return out;
            }
            Ok(WireMessage::Init(init)) if self.signs_all() => {
                let share = ap_share(self.inner.key(), &init.value, init.sn, init.prover);
                let reply = WireMessage::Sig(QuorumSig { signer: self.id, share }).encode();
                out.effects.push(Effect::Send(init.prover, reply));
                out.events.push(EventKind::Answered { pid: self.id, prover: init.prover, sn: init.sn });
                return out;
            }
            _ => {}
        }
        let effects = self.inner.deliver(ctx, bytes);
        let mut filtered = self.filter(effects);
        filtered.events.append(&mut out.events);
        filtered
    }

    /// Applies script-specific rewriting to the honest code's effects.
    fn filter(&mut self, effects: Vec<Effect>) -> AgentOutput {
        if let ByzScript::Replay { copies } = self.script {
            for e in &effects {
                if let Effect::RaSend(dst, bytes) = e {
                    for _ in 0..copies {
                        self.outbox.push_back(Outgoing { channel: Channel::RaSend, dst: *dst, bytes: bytes.clone() });
                    }
                }
            }
        }
        AgentOutput { effects, ..AgentOutput::default() }
    }

    /// Step at which the script next wants to act, if it has not yet.
    pub fn next_wake(&self) -> Option<u64> {
        if self.fired {
            return None;
        }
        match self.script {
            ByzScript::Equivocate { at_step, .. } | ByzScript::Flood { at_step, .. } => Some(at_step),
            _ => None,
        }
    }

    pub fn has_outbox(&self) -> bool {
        !self.outbox.is_empty()
    }

    pub fn drain_outbox(&mut self, cap: usize) -> Vec<Outgoing> {
        let k = cap.min(self.outbox.len());
        self.outbox.drain(..k).collect()
    }

    pub fn tick(&mut self, ctx: &Context, step: u64) -> AgentOutput {
        let mut out = AgentOutput::default();
        match self.script.clone() {
            ByzScript::Flood { at_step, count, len } if !self.fired && step >= at_step => {
                self.fired = true;
                let n = ctx.n() as u64;
                for _ in 0..count {
                    let dst = (self.rng.next_u64() % n) as ProcessId;
                    let mut bytes = alloc::vec![0u8; len as usize];
                    self.rng.fill_bytes(&mut bytes);
                    self.outbox.push_back(Outgoing { channel: Channel::Send, dst, bytes });
                }
            }
            ByzScript::Equivocate { at_step, amount, receivers, split, .. } if !self.fired && step >= at_step => {
                if !self.inner.is_idle() {
                    return out;
                }
                self.fired = true;
                self.equivocate(ctx, amount, receivers, split, &mut out);
            }
            _ => {}
        }
        out
    }

    fn equivocate(&mut self, ctx: &Context, amount: u64, receivers: [ProcessId; 2], split: bool, out: &mut AgentOutput) {
        let state = self.inner.state().clone();
        let backend = self.inner.backend();
        let mut branches = Vec::with_capacity(2);
        for rcv in receivers {
            let tau = TransferDetails { snd: self.id, v: amount.into(), rcv, sn: state.sn + 1 };
            let Ok(update) = prepare_update(ctx, backend, &state, &tau, None, &mut self.rng) else {
                out.events.push(EventKind::Ignored { pid: self.id, reason: "equivocation not fundable".into() });
                return;
            };
            let value = update.payload.to_bytes();
            let tag = crate::agreement::ap_tag(&value, update.sn, self.id);
            let share = ap_share(self.inner.key(), &value, update.sn, self.id);
            branches.push(Branch { update, value, tag, shares: alloc::vec![(self.id, share)], proof: None });
        }
        let inits: Vec<Vec<u8>> = branches
            .iter()
            .map(|b| {
                let data = b.update.data.to_bytes();
                let init_sig = init_signature(self.inner.key(), &b.value, &data, b.update.sn, self.id);
                WireMessage::Init(QuorumInit { value: b.value.clone(), data, sn: b.update.sn, prover: self.id, init_sig }).encode()
            })
            .collect();

        let mut correct: Vec<ProcessId> =
            (0..ctx.n() as ProcessId).filter(|p| *p != self.id && !self.colluders.contains(p)).collect();
        for i in (1..correct.len()).rev() {
            let j = (self.rng.next_u64() % (i as u64 + 1)) as usize;
            correct.swap(i, j);
        }
        let half = correct.len() / 2;
        for (k, p) in correct.iter().enumerate() {
            if split {
                let which = usize::from(k >= half);
                self.outbox.push_back(Outgoing { channel: Channel::Send, dst: *p, bytes: inits[which].clone() });
            } else {
                for init in &inits {
                    self.outbox.push_back(Outgoing { channel: Channel::Send, dst: *p, bytes: init.clone() });
                }
            }
        }
        for p in self.colluders.iter().filter(|p| **p != self.id) {
            for init in &inits {
                self.outbox.push_back(Outgoing { channel: Channel::Send, dst: *p, bytes: init.clone() });
            }
        }
        let [a, b] = <[Branch; 2]>::try_from(branches).expect("two branches");
        self.equivocation = Some(Equivocation { branches: [a, b], notices_sent: false });
    }

    fn equivocation_wants(&self, ctx: &Context, sig: &QuorumSig) -> bool {
        let (Some(eq), Some(key)) = (&self.equivocation, ctx.committee.keys.get(sig.signer as usize)) else {
            return false;
        };
        eq.branches.iter().any(|b| share_valid(key, &b.tag, &sig.share))
    }

    fn collect(&mut self, ctx: &Context, sig: QuorumSig, out: &mut AgentOutput) {
        let id = self.id;
        let send = matches!(self.script, ByzScript::Equivocate { send_transfers: true, .. });
        let Some(eq) = &mut self.equivocation else {
            return;
        };
        let key = &ctx.committee.keys[sig.signer as usize];
        let mut fresh = Vec::new();
        for (k, b) in eq.branches.iter_mut().enumerate() {
            if b.proof.is_some() || !share_valid(key, &b.tag, &sig.share) || b.shares.iter().any(|(s, _)| *s == sig.signer) {
                continue;
            }
            b.shares.push((sig.signer, sig.share));
            if b.shares.len() >= ctx.committee.threshold() {
                b.proof = ap_aggregate(&ctx.committee, &b.value, b.update.sn, id, &b.shares);
                if let Some(proof) = &b.proof {
                    out.certificates.push(Certificate { prover: id, sn: b.update.sn, value: b.value.clone(), proof: proof.clone() });
                    out.events.push(EventKind::Certified { update: update_record(id, &b.update) });
                    fresh.push(k);
                }
            }
        }
        if !send || fresh.is_empty() {
            return;
        }
        // Each certified branch gets its notice with its own proof. The first
        // certificate is also tried on the other branch's notice.
        let mut notices = Vec::new();
        for &k in &fresh {
            notices.push((k, eq.branches[k].proof.clone().expect("just certified")));
        }
        if !eq.notices_sent {
            eq.notices_sent = true;
            let other = 1 - fresh[0];
            if eq.branches[other].proof.is_none() {
                notices.push((other, eq.branches[fresh[0]].proof.clone().expect("just certified")));
            }
        }
        for (k, proof) in notices {
            let u = &eq.branches[k].update;
            let msg = TransferMessage {
                tau: u.tau.clone(),
                proof,
                acc: u.payload.acc.clone(),
                witness: u.witness.clone(),
                bal_c: u.payload.bal_c,
            };
            let bytes = WireMessage::Transfer(msg).encode();
            self.outbox.push_back(Outgoing { channel: Channel::RaSend, dst: u.tau.rcv, bytes });
        }
    }
}

pub(crate) fn update_record(issuer: ProcessId, u: &PreparedUpdate) -> UpdateRecord {
    UpdateRecord {
        issuer,
        sn: u.sn,
        tau: TauRecord::from(&u.tau),
        role: RoleRecord::from(u.role),
        payload: Digest32::of(&u.payload.to_bytes()),
        prev: Digest32::of(&u.data.old.to_bytes()),
    }
}
