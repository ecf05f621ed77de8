//! Scenario description, as read from JSON.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::predicate::Backend;
use crate::setup::check_fault_bound;
use crate::wire::MsgKind;
use crate::ProcessId;

fn default_fairness() -> u64 {
    64
}

fn default_backend() -> Backend {
    Backend::IdealZk
}

fn default_injections() -> usize {
    4
}

fn default_deferred_cap() -> usize {
    crate::agreement::DEFAULT_DEFERRED_CAP
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    #[default]
    Toy,
    Rsa2048,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OpKind {
    Transfer { to: ProcessId, amount: u64 },
    Balance,
}

/// Operation invoked at process `process` once the clock reaches `at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    #[serde(default)]
    pub at: u64,
    pub process: ProcessId,
    pub op: OpKind,
}

/// Which envelope the network delivers next, among those not overdue.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulePolicy {
    #[default]
    Random,
    Fifo,
    /// Newest first.
    Lifo,
    /// Holds back matching envelopes for as long as fairness allows. Empty
    /// lists match everything.
    Delay {
        #[serde(default)]
        kinds: Vec<MsgKind>,
        #[serde(default)]
        from: Vec<ProcessId>,
        #[serde(default)]
        to: Vec<ProcessId>,
    },
}

/// Scripted Byzantine behaviour. Except where noted the process runs the
/// honest account code underneath.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ByzScript {
    /// Never sends anything.
    Silent,
    /// Signs every init it sees, without the FIFO gate or predicate check.
    SignAll,
    /// At `at_step`, proposes two sending updates with the same sequence
    /// number, to `receivers[0]` and `receivers[1]`. With `split` the correct
    /// processes are divided into two random halves, one per proposal;
    /// otherwise everyone gets both. Fellow Byzantine processes always get
    /// both. With `send_transfers` both transfer notices go out once either
    /// proposal is certified.
    Equivocate {
        at_step: u64,
        amount: u64,
        receivers: [ProcessId; 2],
        #[serde(default = "yes")]
        split: bool,
        #[serde(default)]
        send_transfers: bool,
        #[serde(default)]
        sign_all: bool,
    },
    /// Sends every transfer notice `copies` extra times.
    Replay { copies: u32 },
    /// At `at_step`, sends `count` random byte strings of length `len` to random processes.
    Flood { at_step: u64, count: u32, len: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByzantineSpec {
    pub id: ProcessId,
    pub script: ByzScript,
}

/// Deliberate protocol faults, for negative fixtures only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Faults {
    /// Correct processes answer every init, even for a sequence number they
    /// already signed.
    #[serde(default)]
    pub disable_fifo_gate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub t: usize,
    #[serde(default)]
    pub seed: u64,
    /// Deliveries an envelope may be passed over before it must go next.
    #[serde(default = "default_fairness")]
    pub fairness: u64,
    pub balances: Vec<u64>,
    #[serde(default)]
    pub operations: Vec<OpSpec>,
    #[serde(default)]
    pub byzantine: Vec<ByzantineSpec>,
    #[serde(default)]
    pub schedule: SchedulePolicy,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub group: GroupMode,
    /// Defaults to `50 * n * max(1, transfers)` past the last scheduled operation.
    #[serde(default)]
    pub step_limit: Option<u64>,
    /// Cap on script-originated envelopes per Byzantine process per step.
    #[serde(default = "default_injections")]
    pub max_injections_per_step: usize,
    #[serde(default = "default_deferred_cap")]
    pub deferred_cap: usize,
    #[serde(default)]
    pub faults: Faults,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    FaultBound { n: usize, t: usize },
    BalanceCount { n: usize, got: usize },
    ZeroFairness,
    ZeroDeferredCap,
    TooManyByzantine { t: usize, got: usize },
    UnknownProcess(ProcessId),
    DuplicateByzantine(ProcessId),
    SupplyOverflow,
    BadScript(ProcessId, &'static str),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::FaultBound { n, t } => write!(f, "need n > 3t, got n = {n}, t = {t}"),
            ScenarioError::BalanceCount { n, got } => write!(f, "expected {n} balances, got {got}"),
            ScenarioError::ZeroFairness => f.write_str("fairness must be at least 1"),
            ScenarioError::ZeroDeferredCap => f.write_str("deferred_cap must be at least 1"),
            ScenarioError::TooManyByzantine { t, got } => write!(f, "{got} Byzantine processes exceed t = {t}"),
            ScenarioError::UnknownProcess(p) => write!(f, "process {p} is out of range"),
            ScenarioError::DuplicateByzantine(p) => write!(f, "process {p} listed twice as Byzantine"),
            ScenarioError::SupplyOverflow => f.write_str("total supply does not fit in 64 bits"),
            ScenarioError::BadScript(p, why) => write!(f, "script of process {p}: {why}"),
        }
    }
}

impl Scenario {
    /// All-correct scenario with the given balances and no operations.
    pub fn new(t: usize, balances: Vec<u64>, seed: u64) -> Self {
        Scenario {
            n: balances.len(),
            t,
            seed,
            fairness: default_fairness(),
            balances,
            operations: Vec::new(),
            byzantine: Vec::new(),
            schedule: SchedulePolicy::Random,
            backend: default_backend(),
            group: GroupMode::Toy,
            step_limit: None,
            max_injections_per_step: default_injections(),
            deferred_cap: default_deferred_cap(),
            faults: Faults::default(),
        }
    }

    pub fn transfer(mut self, at: u64, from: ProcessId, to: ProcessId, amount: u64) -> Self {
        self.operations.push(OpSpec { at, process: from, op: OpKind::Transfer { to, amount } });
        self
    }

    pub fn balance(mut self, at: u64, process: ProcessId) -> Self {
        self.operations.push(OpSpec { at, process, op: OpKind::Balance });
        self
    }

    pub fn with_byzantine(mut self, id: ProcessId, script: ByzScript) -> Self {
        self.byzantine.push(ByzantineSpec { id, script });
        self
    }

    pub fn transfer_count(&self) -> usize {
        self.operations.iter().filter(|o| matches!(o.op, OpKind::Transfer { .. })).count()
    }

    pub fn effective_step_limit(&self) -> u64 {
        self.step_limit.unwrap_or_else(|| {
            let last = self.operations.iter().map(|o| o.at).max().unwrap_or(0);
            last + 50 * self.n as u64 * self.transfer_count().max(1) as u64
        })
    }

    pub fn byzantine_ids(&self) -> BTreeSet<ProcessId> {
        self.byzantine.iter().map(|b| b.id).collect()
    }

    pub fn is_correct(&self, id: ProcessId) -> bool {
        !self.byzantine.iter().any(|b| b.id == id)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let (n, t) = (self.n, self.t);
        check_fault_bound(n, t).map_err(|_| ScenarioError::FaultBound { n, t })?;
        if self.balances.len() != n {
            return Err(ScenarioError::BalanceCount { n, got: self.balances.len() });
        }
        if self.fairness == 0 {
            return Err(ScenarioError::ZeroFairness);
        }
        if self.deferred_cap == 0 {
            return Err(ScenarioError::ZeroDeferredCap);
        }
        if self.byzantine.len() > t {
            return Err(ScenarioError::TooManyByzantine { t, got: self.byzantine.len() });
        }
        let in_range = |p: ProcessId| if (p as usize) < n { Ok(()) } else { Err(ScenarioError::UnknownProcess(p)) };
        let mut seen = BTreeSet::new();
        for b in &self.byzantine {
            in_range(b.id)?;
            if !seen.insert(b.id) {
                return Err(ScenarioError::DuplicateByzantine(b.id));
            }
            if let ByzScript::Equivocate { receivers, .. } = &b.script {
                in_range(receivers[0])?;
                in_range(receivers[1])?;
                if receivers[0] == receivers[1] || receivers.contains(&b.id) {
                    return Err(ScenarioError::BadScript(b.id, "receivers must be two distinct other processes"));
                }
            }
        }
        for o in &self.operations {
            in_range(o.process)?;
            if let OpKind::Transfer { to, .. } = o.op {
                in_range(to)?;
            }
        }
        self.balances.iter().try_fold(0u64, |acc, &b| acc.checked_add(b)).ok_or(ScenarioError::SupplyOverflow)?;
        Ok(())
    }
}
