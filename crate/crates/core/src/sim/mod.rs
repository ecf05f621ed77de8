//! Deterministic discrete-event network simulator.
//!
//! Reliable asynchronous channels with a seeded, fairness-bounded adversarial
//! scheduler. One step delivers one envelope; operations and adversary
//! scripts fire when the step clock reaches their start step, and the clock
//! jumps ahead when the network is idle.

pub mod adversary;
pub mod scenario;
pub mod scheduler;
pub mod trace;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigUint;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use sha2::{Digest, Sha256};

use crate::account::{Account, Effect, Installed, OpResult, Operation, ProcessState};
use crate::agreement::{AgreementProof, Committee};
use crate::crypto::{GroupParams, HashToPrime, PrimeCache};
use crate::encoding::Encode;
use crate::predicate::Context;
use crate::setup::{system_setup, Genesis};
use crate::wire::MsgKind;
use crate::ProcessId;

use adversary::{Agent, AgentOutput};
pub use scenario::{ByzScript, ByzantineSpec, Faults, GroupMode, OpKind, OpSpec, Scenario, ScenarioError, SchedulePolicy};
use scheduler::Scheduler;
pub use trace::{Channel, Digest32, Event, EventKind, Observation, OpRecord, ResultRecord, RoleRecord, TauRecord, UpdateRecord};

/// Length of the public shadow of a receiver-anonymous send.
pub const BLOB_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Nothing left to deliver or invoke, and every correct account is idle.
    Quiescent,
    /// The step limit was reached first.
    StepLimit,
    /// Nothing left to deliver, but some correct account still waits.
    Stalled,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    /// Envelopes enqueued, counting each broadcast copy and the private half of each receiver-anonymous send.
    pub messages: u64,
    pub bytes: u64,
    /// Cost model: send 1, broadcast n, receiver-anonymous send n.
    pub accounted_cost: u64,
    pub steps: u64,
    pub deliveries: u64,
    /// Longest a delivered envelope waited, in deliveries.
    pub max_wait: u64,
    pub committed: u64,
    pub aborted: u64,
    pub credited: u64,
    /// Serialized persistent state per process at the end of the run.
    pub storage: Vec<u64>,
}

/// A certificate that was assembled during the run.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub prover: ProcessId,
    pub sn: u64,
    pub value: Vec<u8>,
    pub proof: AgreementProof,
}

#[derive(Debug)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub n: usize,
    pub t: usize,
    pub byzantine: BTreeSet<ProcessId>,
    pub initial_balances: Vec<u64>,
    pub genesis: Genesis,
    pub committee: Committee,
    /// Final state of every account; Byzantine entries are their honest inner code.
    pub states: Vec<ProcessState>,
    pub trace: Vec<Observation>,
    pub events: Vec<Event>,
    pub certificates: Vec<Certificate>,
    pub metrics: Metrics,
    /// Correct processes that halted on an internal error.
    pub halted: Vec<(ProcessId, String)>,
    pub context: Context,
}

enum Node {
    Correct(Account),
    Byzantine(Agent),
}

impl Node {
    fn account(&self) -> &Account {
        match self {
            Node::Correct(a) => a,
            Node::Byzantine(b) => b.account(),
        }
    }
}

/// ChaCha20 stream for one role in one run.
pub fn derive_rng(seed: u64, label: &str, index: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"qaat/sim/rng");
    h.update(seed.to_be_bytes());
    h.update((label.len() as u32).to_be_bytes());
    h.update(label.as_bytes());
    h.update(index.to_be_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

pub fn group_for(mode: GroupMode, seed: u64) -> GroupParams {
    match mode {
        GroupMode::Toy => GroupParams::toy(),
        GroupMode::Rsa2048 => GroupParams::generate(2048, &mut derive_rng(seed, "group", 0)),
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub record_trace: bool,
    /// Prime cache to reuse across runs; a fresh one otherwise.
    pub primes: Option<Rc<PrimeCache>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_trace: true, primes: None }
    }
}

struct Sim {
    ctx: Context,
    n: usize,
    step: u64,
    nodes: Vec<Node>,
    sched: Scheduler,
    events: Vec<Event>,
    trace: Vec<Observation>,
    certificates: Vec<Certificate>,
    metrics: Metrics,
    blob_seed: [u8; 32],
    blob_counter: u64,
    record_trace: bool,
    halted: Vec<(ProcessId, String)>,
    injection_cap: usize,
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    run_with(scenario, RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: RunOptions) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let n = scenario.n;
    let seed = scenario.seed;
    let group = group_for(scenario.group, seed);
    let balances: Vec<BigUint> = scenario.balances.iter().map(|&b| BigUint::from(b)).collect();
    let (genesis, committee, kits) = system_setup(&group, scenario.t, &balances, &mut derive_rng(seed, "setup", 0))
        .map_err(|_| ScenarioError::FaultBound { n, t: scenario.t })?;
    let ctx = Context::new(group, committee.clone(), genesis.empty_digests.clone(), options.primes.clone().unwrap_or_else(|| Rc::new(PrimeCache::new(HashToPrime::default()))));

    let byzantine = scenario.byzantine_ids();
    let nodes = kits
        .into_iter()
        .map(|kit| {
            let id = kit.state.id;
            let rng = derive_rng(seed, "process", u64::from(id));
            let mut acct = Account::new(kit, n, genesis.directory_root, scenario.backend, scenario.deferred_cap, rng);
            match scenario.byzantine.iter().find(|b| b.id == id) {
                Some(spec) => {
                    let rng = derive_rng(seed, "adversary", u64::from(id));
                    Node::Byzantine(Agent::new(spec.script.clone(), acct, rng, byzantine.clone()))
                }
                None => {
                    if scenario.faults.disable_fifo_gate {
                        acct.ap_mut().disable_fifo_gate();
                    }
                    Node::Correct(acct)
                }
            }
        })
        .collect();

    let mut blob_seed = [0u8; 32];
    blob_seed.copy_from_slice(&Sha256::digest([&b"qaat/sim/blob"[..], &seed.to_be_bytes()].concat()));
    let mut sim = Sim {
        ctx,
        n,
        step: 0,
        nodes,
        sched: Scheduler::new(scenario.schedule.clone(), scenario.fairness, derive_rng(seed, "scheduler", 0)),
        events: Vec::new(),
        trace: Vec::new(),
        certificates: Vec::new(),
        metrics: Metrics::default(),
        blob_seed,
        blob_counter: 0,
        record_trace: options.record_trace,
        halted: Vec::new(),
        injection_cap: scenario.max_injections_per_step,
    };

    let mut ops: Vec<&OpSpec> = scenario.operations.iter().collect();
    ops.sort_by_key(|o| o.at);
    let limit = scenario.effective_step_limit();
    let outcome = sim.main_loop(&ops, limit);

    let storage = sim.nodes.iter().map(|nd| nd.account().storage_bytes(&sim.ctx).len() as u64).collect();
    let mut metrics = sim.metrics;
    metrics.steps = sim.step;
    metrics.deliveries = sim.sched.deliveries();
    metrics.max_wait = sim.sched.max_wait();
    metrics.storage = storage;
    Ok(RunOutput {
        outcome,
        n,
        t: scenario.t,
        byzantine,
        initial_balances: scenario.balances.clone(),
        genesis,
        committee,
        states: sim.nodes.iter().map(|nd| nd.account().state().clone()).collect(),
        trace: sim.trace,
        events: sim.events,
        certificates: sim.certificates,
        metrics,
        halted: sim.halted,
        context: sim.ctx,
    })
}

impl Sim {
    fn main_loop(&mut self, ops: &[&OpSpec], limit: u64) -> Outcome {
        let mut next_op = 0usize;
        let mut op_id = 0u64;
        loop {
            while next_op < ops.len() && ops[next_op].at <= self.step {
                let o = ops[next_op];
                next_op += 1;
                let (operation, record) = match o.op {
                    OpKind::Transfer { to, amount } => {
                        (Operation::Transfer { to, amount: BigUint::from(amount) }, OpRecord::Transfer { to, amount })
                    }
                    OpKind::Balance => (Operation::Balance, OpRecord::Balance),
                };
                self.event(EventKind::Invoked { pid: o.process, op: op_id, operation: record });
                let pid = o.process;
                match &mut self.nodes[pid as usize] {
                    Node::Correct(a) => {
                        let effects = a.invoke(&self.ctx, op_id, operation);
                        self.apply(pid, effects);
                    }
                    Node::Byzantine(b) => {
                        let out = b.invoke(&self.ctx, op_id, operation);
                        self.apply_agent(pid, out);
                    }
                }
                op_id += 1;
            }
            self.tick_adversaries();

            if self.sched.is_empty() {
                let wake = self.next_wake(ops.get(next_op).map(|o| o.at));
                match wake {
                    Some(w) if w <= limit => {
                        self.step = if w > self.step { w } else { self.step + 1 };
                        continue;
                    }
                    Some(_) => return Outcome::StepLimit,
                    None => {
                        let stuck = self.nodes.iter().any(|nd| matches!(nd, Node::Correct(a) if !a.is_idle() && !a.is_halted()));
                        return if stuck { Outcome::Stalled } else { Outcome::Quiescent };
                    }
                }
            }
            if self.step >= limit {
                return Outcome::StepLimit;
            }
            let env = self.sched.next().expect("checked non-empty");
            self.step += 1;
            let dst = env.dst;
            match &mut self.nodes[dst as usize] {
                Node::Correct(a) => {
                    let effects = a.deliver(&self.ctx, &env.bytes);
                    self.apply(dst, effects);
                }
                Node::Byzantine(b) => {
                    let out = b.deliver(&self.ctx, &env.bytes);
                    self.apply_agent(dst, out);
                }
            }
        }
    }

    /// Earliest step at which something can happen without a delivery.
    fn next_wake(&self, next_op: Option<u64>) -> Option<u64> {
        let mut wake = next_op;
        for nd in &self.nodes {
            if let Node::Byzantine(b) = nd {
                if b.has_outbox() {
                    wake = Some(wake.map_or(self.step, |w| w.min(self.step)));
                }
                if let Some(w) = b.next_wake() {
                    // A script that cannot fire on an idle network never will.
                    if w > self.step || b.account().is_idle() {
                        wake = Some(wake.map_or(w, |x| x.min(w)));
                    }
                }
            }
        }
        wake
    }

    fn tick_adversaries(&mut self) {
        for i in 0..self.nodes.len() {
            let Node::Byzantine(b) = &mut self.nodes[i] else {
                continue;
            };
            let out = b.tick(&self.ctx, self.step);
            let sends = b.drain_outbox(self.injection_cap);
            let pid = i as ProcessId;
            self.apply_agent(pid, out);
            for s in sends {
                match s.channel {
                    Channel::RaSend => self.ra_send(pid, s.dst, s.bytes),
                    Channel::Broadcast => self.broadcast(pid, s.bytes),
                    Channel::Send => self.send(pid, s.dst, s.bytes),
                }
            }
        }
    }

    fn event(&mut self, kind: EventKind) {
        self.events.push(Event { step: self.step, kind });
    }

    fn observe(&mut self, channel: Channel, src: Option<ProcessId>, dst: Option<ProcessId>, bytes: &[u8]) {
        if self.record_trace {
            let kind = if channel == Channel::RaSend { MsgKind::Opaque } else { MsgKind::of(bytes) };
            self.trace.push(Observation { step: self.step, channel, src, dst, kind, bytes: bytes.to_vec() });
        }
    }

    fn enqueue(&mut self, channel: Channel, src: ProcessId, dst: ProcessId, bytes: Vec<u8>) {
        self.metrics.messages += 1;
        self.metrics.bytes += bytes.len() as u64;
        self.sched.enqueue(channel, src, dst, bytes, self.step);
    }

    fn send(&mut self, src: ProcessId, dst: ProcessId, bytes: Vec<u8>) {
        if dst as usize >= self.n {
            return;
        }
        self.metrics.accounted_cost += 1;
        self.observe(Channel::Send, Some(src), Some(dst), &bytes);
        self.enqueue(Channel::Send, src, dst, bytes);
    }

    fn broadcast(&mut self, src: ProcessId, bytes: Vec<u8>) {
        self.metrics.accounted_cost += self.n as u64;
        for dst in 0..self.n as ProcessId {
            self.observe(Channel::Broadcast, Some(src), Some(dst), &bytes);
            self.enqueue(Channel::Broadcast, src, dst, bytes.clone());
        }
    }

    fn ra_send(&mut self, src: ProcessId, dst: ProcessId, bytes: Vec<u8>) {
        if dst as usize >= self.n {
            return;
        }
        self.metrics.accounted_cost += self.n as u64;
        let blob = self.next_blob();
        self.observe(Channel::RaSend, None, None, &blob);
        self.enqueue(Channel::RaSend, src, dst, bytes);
    }

    /// Fixed-size public shadow, drawn from a stream independent of all payloads.
    fn next_blob(&mut self) -> Vec<u8> {
        let mut blob = Vec::with_capacity(BLOB_LEN);
        for half in 0u8..2 {
            let mut h = Sha256::new();
            h.update(self.blob_seed);
            h.update(self.blob_counter.to_be_bytes());
            h.update([half]);
            blob.extend_from_slice(&h.finalize());
        }
        self.blob_counter += 1;
        blob
    }

    fn apply_agent(&mut self, pid: ProcessId, out: AgentOutput) {
        for e in out.events {
            self.event(e);
        }
        self.certificates.extend(out.certificates);
        self.apply(pid, out.effects);
    }

    fn apply(&mut self, pid: ProcessId, effects: Vec<Effect>) {
        let correct = matches!(self.nodes[pid as usize], Node::Correct(_));
        for e in effects {
            match e {
                Effect::Broadcast(b) => self.broadcast(pid, b),
                Effect::Send(dst, b) => self.send(pid, dst, b),
                Effect::RaSend(dst, b) => self.ra_send(pid, dst, b),
                Effect::Completed { op, result } => {
                    let result = match result {
                        OpResult::Commit => {
                            self.metrics.committed += 1;
                            ResultRecord::Commit
                        }
                        OpResult::Abort => {
                            self.metrics.aborted += 1;
                            ResultRecord::Abort
                        }
                        OpResult::Balance(b) => ResultRecord::Balance(u64::try_from(&b).expect("balances fit in u64")),
                    };
                    self.event(EventKind::Completed { pid, op, result });
                }
                Effect::Installed(inst) => self.installed(pid, inst),
                Effect::Answered { prover, sn } => self.event(EventKind::Answered { pid, prover, sn }),
                Effect::Ignored(why) => self.event(EventKind::Ignored { pid, reason: alloc::format!("{why:?}") }),
                Effect::Halted(why) => {
                    if correct {
                        self.halted.push((pid, why.to_string()));
                    }
                    self.event(EventKind::Halted { pid, reason: why.to_string() });
                }
            }
        }
    }

    fn installed(&mut self, pid: ProcessId, inst: Installed) {
        if inst.role == crate::account::Role::Receiver {
            self.metrics.credited += 1;
        }
        let value = inst.payload.to_bytes();
        let update = UpdateRecord {
            issuer: inst.issuer,
            sn: inst.sn,
            tau: TauRecord::from(&inst.tau),
            role: RoleRecord::from(inst.role),
            payload: Digest32::of(&value),
            prev: Digest32::of(&inst.prev.to_bytes()),
        };
        self.certificates.push(Certificate { prover: inst.issuer, sn: inst.sn, value, proof: inst.proof });
        self.event(EventKind::Installed { pid, update });
    }
}

/// Groups certificates by `(prover, sn)` and returns every slot holding two
/// distinct payloads that both verify.
pub fn conflicting_certificates(committee: &Committee, certs: &[Certificate]) -> Vec<(ProcessId, u64)> {
    let mut by_slot: BTreeMap<(ProcessId, u64), Vec<&Certificate>> = BTreeMap::new();
    for c in certs {
        if crate::agreement::ap_verify(committee, &c.proof, &c.value, c.sn, c.prover) {
            by_slot.entry((c.prover, c.sn)).or_default().push(c);
        }
    }
    by_slot
        .into_iter()
        .filter(|(_, cs)| cs.iter().any(|c| c.value != cs[0].value))
        .map(|(slot, _)| slot)
        .collect()
}

/// Least-squares line through `(x, y)` points: `(slope, intercept, r_squared)`.
/// `r_squared` is 1 when the points have no spread in `y`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r2))
}
