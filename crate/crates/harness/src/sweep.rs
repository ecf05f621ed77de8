//! `qaat sweep`: one generated workload per axis value, one CSV row per run.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qaat_core::sim::{run_with, Outcome, RunOptions, Scenario};
use qaat_core::ProcessId;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Vary the number of processes, fixed transfer count.
    N,
    /// Vary the transfer count, fixed number of processes.
    Transfers,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Transfers => "transfers",
        }
    }
}

pub const SWEEP_HEADER: [&str; 17] = [
    "axis",
    "value",
    "seed",
    "n",
    "t",
    "transfers",
    "committed",
    "messages",
    "accounted_cost",
    "bytes",
    "steps",
    "messages_per_transfer",
    "storage_mean",
    "storage_min",
    "storage_max",
    "outcome",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: u64,
    pub seed: u64,
    pub n: usize,
    pub t: usize,
    pub transfers: usize,
    pub committed: u64,
    pub messages: u64,
    pub accounted_cost: u64,
    pub bytes: u64,
    pub steps: u64,
    pub messages_per_transfer: f64,
    pub storage_mean: f64,
    pub storage_min: u64,
    pub storage_max: u64,
    pub outcome: Outcome,
    /// Wall-clock time; the only nondeterministic column.
    pub wall_ms: f64,
}

/// All-correct workload: `transfers` unit transfers issued round-robin, each
/// sender cycling through every other process, all invoked at step 0. Every
/// account starts with enough funds for all of them.
///
/// `base` supplies everything but `n`, `t`, balances and operations.
pub fn workload(base: &Scenario, n: usize, transfers: usize) -> Scenario {
    let mut s = Scenario::new((n - 1) / 3, vec![transfers.max(1) as u64; n], base.seed);
    s.fairness = base.fairness;
    s.schedule = base.schedule.clone();
    s.backend = base.backend;
    s.group = base.group;
    s.max_injections_per_step = base.max_injections_per_step;
    s.deferred_cap = base.deferred_cap;
    for k in 0..transfers {
        let from = k % n;
        let to = (from + 1 + (k / n) % (n - 1)) % n;
        s = s.transfer(0, from as ProcessId, to as ProcessId, 1);
    }
    s
}

fn sweep_one(base: &Scenario, axis: Axis, value: u64, n: usize, transfers: usize, seed: u64) -> Result<SweepRow, HarnessError> {
    let mut s = workload(base, n, transfers);
    s.seed = seed;
    let start = Instant::now();
    let out = run_with(&s, RunOptions { record_trace: false, primes: None }).map_err(|e| HarnessError::Usage(e.to_string()))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let m = &out.metrics;
    let storage = &m.storage;
    Ok(SweepRow {
        axis,
        value,
        seed,
        n,
        t: s.t,
        transfers,
        committed: m.committed,
        messages: m.messages,
        accounted_cost: m.accounted_cost,
        bytes: m.bytes,
        steps: m.steps,
        messages_per_transfer: if m.committed == 0 { 0.0 } else { m.messages as f64 / m.committed as f64 },
        storage_mean: storage.iter().sum::<u64>() as f64 / storage.len().max(1) as f64,
        storage_min: storage.iter().copied().min().unwrap_or(0),
        storage_max: storage.iter().copied().max().unwrap_or(0),
        outcome: out.outcome,
        wall_ms,
    })
}

/// Runs `trials` seeds (starting at `base.seed`) per axis value. The other
/// dimension is held at `fixed_n` or `fixed_transfers`. Runs are spread over
/// worker threads; rows come back in (value, seed) order.
pub fn cmd_sweep(
    base: &Scenario,
    axis: Axis,
    values: &[u64],
    fixed_n: usize,
    fixed_transfers: usize,
    trials: u64,
) -> Result<Vec<SweepRow>, HarnessError> {
    let jobs: Vec<(u64, usize, usize, u64)> = values
        .iter()
        .flat_map(|&v| {
            let (n, transfers) = match axis {
                Axis::N => (v as usize, fixed_transfers),
                Axis::Transfers => (fixed_n, v as usize),
            };
            (0..trials.max(1)).map(move |k| (v, n, transfers, base.seed.wrapping_add(k)))
        })
        .collect();
    for &(_, n, _, _) in &jobs {
        if n < 2 {
            return Err(HarnessError::Usage(format!("sweep needs at least 2 processes, got {n}")));
        }
    }
    jobs.into_par_iter().map(|(v, n, transfers, seed)| sweep_one(base, axis, v, n, transfers, seed)).collect()
}

/// Writes the header and then one record per row.
pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_never_self_transfers_and_spreads_receivers() {
        let s = workload(&Scenario::new(0, vec![0; 1], 0), 4, 12);
        assert_eq!(s.n, 4);
        assert_eq!(s.t, 1);
        let mut pairs = std::collections::BTreeSet::new();
        for op in &s.operations {
            let qaat_core::sim::OpKind::Transfer { to, .. } = op.op else { panic!("transfer expected") };
            assert_ne!(op.process, to);
            pairs.insert((op.process, to));
        }
        assert_eq!(pairs.len(), 12);
    }

    #[test]
    fn empty_axis_gives_header_only() {
        let rows = cmd_sweep(&Scenario::new(0, vec![1], 0), Axis::N, &[], 4, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", SWEEP_HEADER.join(",")));
    }

    #[test]
    fn header_matches_row_fields() {
        let row = SweepRow {
            axis: Axis::N,
            value: 4,
            seed: 0,
            n: 4,
            t: 1,
            transfers: 1,
            committed: 1,
            messages: 17,
            accounted_cost: 0,
            bytes: 0,
            steps: 0,
            messages_per_transfer: 17.0,
            storage_mean: 0.0,
            storage_min: 0,
            storage_max: 0,
            outcome: Outcome::Quiescent,
            wall_ms: 0.0,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
    }
}
