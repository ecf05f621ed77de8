//! Offline check that a recorded run can be sequenced as a valid asset
//! transfer history.
//!
//! From the ground-truth event log we rebuild every process's invocations,
//! collect the account updates reachable from those of correct processes,
//! synthesize Byzantine transfer lists from them, and for each correct
//! process topologically sort the resulting transfers and operations under
//! the causal constraints. The sorted sequence is then replayed to check
//! every balance result and every transfer's funding.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::{Digest32, Event, EventKind, OpRecord, ResultRecord, RoleRecord, TauRecord, UpdateRecord};
use crate::ProcessId;

/// One operation of a process, as invoked and (if it finished) answered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub op: u64,
    pub kind: OpRecord,
    pub result: Option<ResultRecord>,
    pub invoked_step: u64,
    pub completed_step: Option<u64>,
    /// Position of the completion in the event log.
    pub completed_seq: Option<usize>,
    /// Transfer committed by this invocation.
    pub tau: Option<TauRecord>,
}

/// A certified update plus when it appeared in the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub update: UpdateRecord,
    pub step: u64,
    /// Position in the event log.
    pub seq: usize,
    /// Installed by the issuer's own account code.
    pub installed: bool,
}

#[derive(Debug, Clone)]
pub struct GlobalHistory {
    pub n: usize,
    pub byzantine: BTreeSet<ProcessId>,
    pub initial: Vec<u64>,
    /// Invocations per process in invocation order.
    pub local: Vec<Vec<Invocation>>,
    pub artifacts: Vec<Artifact>,
}

impl GlobalHistory {
    pub fn from_events(n: usize, byzantine: BTreeSet<ProcessId>, initial: Vec<u64>, events: &[Event]) -> Self {
        let mut local: Vec<Vec<Invocation>> = alloc::vec![Vec::new(); n];
        let mut where_: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
        let mut last_send: Vec<Option<TauRecord>> = alloc::vec![None; n];
        let mut artifacts = Vec::new();
        for (seq, e) in events.iter().enumerate() {
            match &e.kind {
                EventKind::Invoked { pid, op, operation } => {
                    let p = *pid as usize;
                    where_.insert(*op, (p, local[p].len()));
                    local[p].push(Invocation {
                        op: *op,
                        kind: operation.clone(),
                        result: None,
                        invoked_step: e.step,
                        completed_step: None,
                        completed_seq: None,
                        tau: None,
                    });
                }
                EventKind::Completed { op, result, .. } => {
                    if let Some(&(p, k)) = where_.get(op) {
                        let inv = &mut local[p][k];
                        inv.result = Some(result.clone());
                        inv.completed_step = Some(e.step);
                        inv.completed_seq = Some(seq);
                        if *result == ResultRecord::Commit {
                            inv.tau = last_send[p].take();
                        }
                    }
                }
                EventKind::Installed { pid, update } => {
                    if update.role != RoleRecord::Receiving {
                        last_send[*pid as usize] = Some(update.tau.clone());
                    }
                    artifacts.push(Artifact { update: update.clone(), step: e.step, seq, installed: true });
                }
                EventKind::Certified { update } => {
                    artifacts.push(Artifact { update: update.clone(), step: e.step, seq, installed: false });
                }
                _ => {}
            }
        }
        GlobalHistory { n, byzantine, initial, local, artifacts }
    }

    pub fn from_run(run: &crate::sim::RunOutput) -> Self {
        Self::from_events(run.n, run.byzantine.clone(), run.initial_balances.clone(), &run.events)
    }

    pub fn is_correct(&self, p: ProcessId) -> bool {
        !self.byzantine.contains(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum HistoryError {
    /// An update in the closure has no recorded predecessor.
    MissingPredecessor { issuer: ProcessId, sn: u64 },
    /// A receiving update has no recorded sending update.
    MissingSendingUpdate { tau: TauRecord },
    /// The ordering constraints contain a cycle; the nodes are listed in cycle order.
    Cycle { process: ProcessId, nodes: Vec<String> },
    /// Brute force refused: ground set too large.
    TooLarge { size: usize },
}

impl fmt::Display for HistoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryError::MissingPredecessor { issuer, sn } => {
                write!(f, "update ({issuer}, {sn}) has no recorded predecessor")
            }
            HistoryError::MissingSendingUpdate { tau } => write!(f, "credit of {tau:?} has no sending update"),
            HistoryError::Cycle { process, nodes } => write!(f, "ordering for process {process} has a cycle: {nodes:?}"),
            HistoryError::TooLarge { size } => write!(f, "ground set of {size} exceeds brute-force limit"),
        }
    }
}

/// Byzantine transfer lists synthesized from the updates correct processes depend on.
#[derive(Debug, Clone)]
pub struct MockHistory {
    /// Indices into `GlobalHistory::artifacts` of the closure.
    pub closure: BTreeSet<usize>,
    /// Per Byzantine process, its transfers in sequence-number order.
    pub synthesized: BTreeMap<ProcessId, Vec<TauRecord>>,
    /// Slots `(issuer, sn)` where the closure holds more than one payload.
    pub conflicts: Vec<(ProcessId, u64)>,
    /// Where each transfer was debited: log position and step of its sending update.
    pub sending: BTreeMap<TauRecord, (usize, u64)>,
    /// Where each transfer was credited, if its receiving update is known:
    /// receiver sequence number and log position.
    pub receiving: BTreeMap<TauRecord, (u64, usize)>,
}

pub fn build_mock_history(h: &GlobalHistory) -> Result<MockHistory, HistoryError> {
    let mut by_payload: BTreeMap<(ProcessId, Digest32), usize> = BTreeMap::new();
    let mut by_send: BTreeMap<TauRecord, Vec<usize>> = BTreeMap::new();
    for (k, a) in h.artifacts.iter().enumerate() {
        by_payload.entry((a.update.issuer, a.update.payload)).or_insert(k);
        if a.update.role != RoleRecord::Receiving && a.update.issuer == a.update.tau.snd {
            by_send.entry(a.update.tau.clone()).or_default().push(k);
        }
    }

    let mut closure = BTreeSet::new();
    let mut work: Vec<usize> = h
        .artifacts
        .iter()
        .enumerate()
        .filter(|(_, a)| a.installed && h.is_correct(a.update.issuer))
        .map(|(k, _)| k)
        .collect();
    while let Some(k) = work.pop() {
        if !closure.insert(k) {
            continue;
        }
        let u = &h.artifacts[k].update;
        if u.sn > 1 {
            let p = by_payload
                .get(&(u.issuer, u.prev))
                .ok_or(HistoryError::MissingPredecessor { issuer: u.issuer, sn: u.sn })?;
            work.push(*p);
        }
        if u.role == RoleRecord::Receiving {
            let s = by_send.get(&u.tau).ok_or_else(|| HistoryError::MissingSendingUpdate { tau: u.tau.clone() })?;
            work.extend(s.iter().copied());
        }
    }

    let mut slots: BTreeMap<(ProcessId, u64), BTreeSet<Digest32>> = BTreeMap::new();
    let mut sending = BTreeMap::new();
    let mut receiving = BTreeMap::new();
    for &k in &closure {
        let a = &h.artifacts[k];
        let u = &a.update;
        slots.entry((u.issuer, u.sn)).or_default().insert(u.payload);
        match u.role {
            RoleRecord::Receiving => {
                receiving.entry(u.tau.clone()).or_insert((u.sn, a.seq));
            }
            _ => {
                sending.entry(u.tau.clone()).or_insert((a.seq, a.step));
            }
        }
    }
    let conflicts = slots.into_iter().filter(|(_, p)| p.len() > 1).map(|(s, _)| s).collect();

    let mut synthesized: BTreeMap<ProcessId, Vec<TauRecord>> = h.byzantine.iter().map(|&j| (j, Vec::new())).collect();
    for tau in sending.keys() {
        if let Some(list) = synthesized.get_mut(&tau.snd) {
            if tau.is_null() || receiving.contains_key(tau) {
                list.push(tau.clone());
            }
        }
    }
    for list in synthesized.values_mut() {
        list.sort_by_key(|t| (t.sn, t.rcv, t.v));
    }
    Ok(MockHistory { closure, synthesized, conflicts, sending, receiving })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Transfer(TauRecord),
    /// `index` is the position in the process's invocation list.
    Balance { pid: ProcessId, index: usize, value: u64 },
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Transfer(t) => write!(f, "transfer {}->{} of {} (sn {})", t.snd, t.rcv, t.v, t.sn),
            Node::Balance { pid, index, value } => write!(f, "balance of {pid} = {value} (op #{index})"),
        }
    }
}

/// Ground set and ordering constraints for one correct process.
#[derive(Debug, Clone)]
pub struct PartialOrder {
    pub process: ProcessId,
    pub nodes: Vec<Node>,
    /// Tie-break priority `(step, process, local index)` for each node.
    pub priority: Vec<(u64, ProcessId, u64)>,
    pub edges: Vec<(usize, usize)>,
    /// Nodes from the process's own history, in local order.
    pub local: Vec<usize>,
}

impl PartialOrder {
    fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = alloc::vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        succ
    }

    /// Reachability matrix of the edge relation.
    pub fn closure(&self) -> Vec<BTreeSet<usize>> {
        let succ = self.successors();
        (0..self.nodes.len())
            .map(|s| {
                let mut seen = BTreeSet::new();
                let mut stack = succ[s].clone();
                while let Some(x) = stack.pop() {
                    if seen.insert(x) {
                        stack.extend(succ[x].iter().copied());
                    }
                }
                seen
            })
            .collect()
    }

    pub fn precedes(&self, a: &Node, b: &Node) -> bool {
        let (Some(x), Some(y)) = (self.nodes.iter().position(|n| n == a), self.nodes.iter().position(|n| n == b)) else {
            return false;
        };
        self.closure()[x].contains(&y)
    }

    /// Kahn's algorithm, smallest priority first. Fails with a cycle.
    pub fn topological_sort(&self) -> Result<Vec<usize>, HistoryError> {
        let succ = self.successors();
        let mut indeg = alloc::vec![0usize; self.nodes.len()];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut heap: BinaryHeap<Reverse<((u64, ProcessId, u64), usize)>> =
            (0..self.nodes.len()).filter(|&k| indeg[k] == 0).map(|k| Reverse((self.priority[k], k))).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse((_, k))) = heap.pop() {
            order.push(k);
            for &s in &succ[k] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    heap.push(Reverse((self.priority[s], s)));
                }
            }
        }
        if order.len() == self.nodes.len() {
            return Ok(order);
        }
        Err(HistoryError::Cycle { process: self.process, nodes: self.find_cycle(&indeg) })
    }

    fn find_cycle(&self, indeg: &[usize]) -> Vec<String> {
        // Every leftover node has a leftover predecessor, so walking
        // predecessors backwards must revisit a node.
        let mut pred = alloc::vec![None; self.nodes.len()];
        for &(a, b) in &self.edges {
            if indeg[a] > 0 && indeg[b] > 0 {
                pred[b] = Some(a);
            }
        }
        let Some(start) = (0..self.nodes.len()).find(|&k| indeg[k] > 0) else {
            return Vec::new();
        };
        let mut seen = BTreeMap::new();
        let mut path = Vec::new();
        let mut cur = start;
        while !seen.contains_key(&cur) {
            seen.insert(cur, path.len());
            path.push(cur);
            cur = pred[cur].expect("leftover node has a leftover predecessor");
        }
        let mut cycle: Vec<usize> = path[seen[&cur]..].to_vec();
        cycle.reverse();
        cycle.iter().map(|&k| alloc::format!("{}", self.nodes[k])).collect()
    }
}

/// Ground set for `process`: its own completed operations, every committed
/// transfer of the other correct processes and the synthesized Byzantine
/// transfers. Aborted and unfinished operations are left out.
pub fn build_partial_order(h: &GlobalHistory, mock: &MockHistory, process: ProcessId) -> PartialOrder {
    let mut nodes = Vec::new();
    let mut priority = Vec::new();
    let mut index: BTreeMap<TauRecord, usize> = BTreeMap::new();
    let mut local = Vec::new();
    // balance reads of `process` with the log position of their result
    let mut reads: Vec<(usize, usize)> = Vec::new();

    let mut add_transfer = |nodes: &mut Vec<Node>, priority: &mut Vec<_>, tau: &TauRecord| -> usize {
        if let Some(&k) = index.get(tau) {
            return k;
        }
        let step = mock.sending.get(tau).map_or(u64::MAX, |s| s.1);
        nodes.push(Node::Transfer(tau.clone()));
        priority.push((step, tau.snd, tau.sn));
        index.insert(tau.clone(), nodes.len() - 1);
        nodes.len() - 1
    };

    for (p, invs) in h.local.iter().enumerate() {
        let p = p as ProcessId;
        if !h.is_correct(p) {
            continue;
        }
        for (idx, inv) in invs.iter().enumerate() {
            match (&inv.kind, &inv.result) {
                (OpRecord::Transfer { .. }, Some(ResultRecord::Commit)) => {
                    if let Some(tau) = &inv.tau {
                        let k = add_transfer(&mut nodes, &mut priority, tau);
                        if p == process {
                            local.push(k);
                        }
                    }
                }
                (OpRecord::Balance, Some(ResultRecord::Balance(v))) if p == process => {
                    let step = inv.completed_step.unwrap_or(u64::MAX);
                    nodes.push(Node::Balance { pid: p, index: idx, value: *v });
                    priority.push((step, p, idx as u64));
                    local.push(nodes.len() - 1);
                    reads.push((nodes.len() - 1, inv.completed_seq.unwrap_or(usize::MAX)));
                }
                _ => {}
            }
        }
    }
    for list in mock.synthesized.values() {
        for tau in list {
            add_transfer(&mut nodes, &mut priority, tau);
        }
    }

    let mut edges = Vec::new();
    for w in local.windows(2) {
        edges.push((w[0], w[1]));
    }

    // Per issuer, debits in sequence-number order.
    let mut debits: BTreeMap<ProcessId, Vec<(u64, usize)>> = BTreeMap::new();
    for (k, n) in nodes.iter().enumerate() {
        if let Node::Transfer(t) = n {
            debits.entry(t.snd).or_default().push((t.sn, k));
        }
    }
    for list in debits.values_mut() {
        list.sort();
        for w in list.windows(2) {
            edges.push((w[0].1, w[1].1));
        }
    }
    // A credit precedes the receiver's first debit issued after it.
    for (k, n) in nodes.iter().enumerate() {
        let Node::Transfer(t) = n else { continue };
        if t.is_null() {
            continue;
        }
        let Some(&(rsn, _)) = mock.receiving.get(t) else { continue };
        if let Some(list) = debits.get(&t.rcv) {
            if let Some(&(_, d)) = list.iter().find(|(sn, _)| *sn > rsn) {
                edges.push((k, d));
            }
        }
    }
    // Credits to `process` against its balance reads, by log position.
    for (k, n) in nodes.iter().enumerate() {
        let Node::Transfer(t) = n else { continue };
        if t.rcv != process || t.is_null() {
            continue;
        }
        let credited = mock.receiving.get(t).map_or(usize::MAX, |r| r.1);
        let after = reads.iter().find(|(_, s)| *s >= credited).map(|c| c.0);
        let before = reads.iter().rev().find(|(_, s)| *s < credited).map(|c| c.0);
        if let Some(b) = after {
            edges.push((k, b));
        }
        if let Some(b) = before {
            edges.push((b, k));
        }
    }
    PartialOrder { process, nodes, priority, edges, local }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in the sequence.
    pub position: usize,
    pub node: Node,
    /// `total` of the relevant process over the prefix.
    pub prefix_total: i128,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at position {} with prefix total {}", self.node, self.position, self.prefix_total)
    }
}

/// Replays a sequence against the balance and funding conditions.
pub fn check_at_sequence(initial: &[u64], seq: &[Node]) -> Result<(), Violation> {
    let mut total: Vec<i128> = initial.iter().map(|&b| i128::from(b)).collect();
    for (position, node) in seq.iter().enumerate() {
        match node {
            Node::Balance { pid, value, .. } => {
                let have = total[*pid as usize];
                if i128::from(*value) != have {
                    return Err(Violation { position, node: node.clone(), prefix_total: have });
                }
            }
            Node::Transfer(t) => {
                let have = total[t.snd as usize];
                if i128::from(t.v) > have {
                    return Err(Violation { position, node: node.clone(), prefix_total: have });
                }
                if !t.is_null() {
                    total[t.snd as usize] -= i128::from(t.v);
                    total[t.rcv as usize] += i128::from(t.v);
                }
            }
        }
    }
    Ok(())
}

/// Largest ground set the brute-force sequencer accepts.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Searches all orders of the ground set that keep the process's own
/// operations in local order, returning the first valid one.
pub fn brute_force_sequencer(initial: &[u64], order: &PartialOrder) -> Result<Option<Vec<Node>>, HistoryError> {
    let size = order.nodes.len();
    if size > BRUTE_FORCE_LIMIT {
        return Err(HistoryError::TooLarge { size });
    }
    let mut rank = alloc::vec![None; size];
    for (r, &k) in order.local.iter().enumerate() {
        rank[k] = Some(r);
    }
    let mut used = alloc::vec![false; size];
    let mut seq = Vec::with_capacity(size);
    let total: Vec<i128> = initial.iter().map(|&b| i128::from(b)).collect();
    Ok(search(order, &rank, &mut used, &mut seq, total, 0).then(|| seq.iter().map(|&k| order.nodes[k].clone()).collect()))
}

fn search(
    order: &PartialOrder,
    rank: &[Option<usize>],
    used: &mut [bool],
    seq: &mut Vec<usize>,
    total: Vec<i128>,
    next_local: usize,
) -> bool {
    if seq.len() == order.nodes.len() {
        return true;
    }
    for k in 0..order.nodes.len() {
        if used[k] || rank[k].is_some_and(|r| r != next_local) {
            continue;
        }
        let mut t = total.clone();
        let ok = match &order.nodes[k] {
            Node::Balance { pid, value, .. } => i128::from(*value) == t[*pid as usize],
            Node::Transfer(tau) => {
                let fine = i128::from(tau.v) <= t[tau.snd as usize];
                if fine && !tau.is_null() {
                    t[tau.snd as usize] -= i128::from(tau.v);
                    t[tau.rcv as usize] += i128::from(tau.v);
                }
                fine
            }
        };
        if !ok {
            continue;
        }
        used[k] = true;
        seq.push(k);
        if search(order, rank, used, seq, t, next_local + usize::from(rank[k].is_some())) {
            return true;
        }
        seq.pop();
        used[k] = false;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessVerdict {
    pub process: ProcessId,
    pub ground_set: usize,
    pub violation: Option<Violation>,
    pub cycle: Option<HistoryError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub error: Option<HistoryError>,
    /// Slots with two different certified payloads.
    pub conflicts: Vec<(ProcessId, u64)>,
    pub processes: Vec<ProcessVerdict>,
}

/// Builds the mock history and checks a constructed sequence for every correct process.
pub fn check_history(h: &GlobalHistory) -> Verdict {
    let mock = match build_mock_history(h) {
        Ok(m) => m,
        Err(e) => return Verdict { passed: false, error: Some(e), conflicts: Vec::new(), processes: Vec::new() },
    };
    let mut processes = Vec::new();
    for i in 0..h.n as ProcessId {
        if !h.is_correct(i) {
            continue;
        }
        let order = build_partial_order(h, &mock, i);
        let (violation, cycle) = match order.topological_sort() {
            Ok(sorted) => {
                let seq: Vec<Node> = sorted.iter().map(|&k| order.nodes[k].clone()).collect();
                (check_at_sequence(&h.initial, &seq).err(), None)
            }
            Err(e) => (None, Some(e)),
        };
        processes.push(ProcessVerdict { process: i, ground_set: order.nodes.len(), violation, cycle });
    }
    let passed = mock.conflicts.is_empty() && processes.iter().all(|p| p.violation.is_none() && p.cycle.is_none());
    Verdict { passed, error: None, conflicts: mock.conflicts, processes }
}
