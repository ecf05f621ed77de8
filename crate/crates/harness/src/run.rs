//! `qaat run`: one scenario, four output files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use qaat_core::history::{check_history, GlobalHistory, Verdict};
use qaat_core::sim::trace::TRACE_VERSION;
use qaat_core::sim::{conflicting_certificates, run_with, Metrics, Outcome, RunOptions, RunOutput, Scenario};
use qaat_core::ProcessId;

use crate::{write_json, HarnessError, EXIT_INTERNAL, EXIT_OK, EXIT_VIOLATION};

pub const RUN_FILES: [&str; 4] = ["trace.jsonl", "events.jsonl", "metrics.csv", "verdict.json"];

/// Contents of `verdict.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunVerdict {
    pub exit_code: i32,
    pub outcome: Outcome,
    /// Human-readable reasons for a nonzero exit code.
    pub reasons: Vec<String>,
    pub history: Verdict,
    /// Slots with two verifying certificates over different payloads.
    pub conflicting_certificates: Vec<(ProcessId, u64)>,
    pub halted: Vec<(ProcessId, String)>,
    pub metrics: Metrics,
}

impl RunVerdict {
    pub fn from_output(out: &RunOutput) -> Self {
        let history = check_history(&GlobalHistory::from_run(out));
        let conflicting = conflicting_certificates(&out.committee, &out.certificates);
        let mut reasons = Vec::new();
        let mut exit_code = EXIT_OK;
        match out.outcome {
            Outcome::Quiescent => {}
            Outcome::StepLimit => reasons.push("step limit reached before all operations completed".to_string()),
            Outcome::Stalled => reasons.push("network drained with operations still pending".to_string()),
        }
        if let Some(e) = &history.error {
            reasons.push(format!("history could not be reconstructed: {e}"));
        }
        for (p, sn) in &history.conflicts {
            reasons.push(format!("process {p} has two updates installed at sequence number {sn}"));
        }
        for pv in &history.processes {
            if let Some(v) = &pv.violation {
                reasons.push(format!("AT-sequence violation at process {}: {v}", pv.process));
            }
            if let Some(c) = &pv.cycle {
                reasons.push(format!("ordering cycle at process {}: {c}", pv.process));
            }
        }
        for (p, sn) in &conflicting {
            reasons.push(format!("two certificates verify for process {p} at sequence number {sn}"));
        }
        if !reasons.is_empty() {
            exit_code = EXIT_VIOLATION;
        }
        for (p, why) in &out.halted {
            reasons.push(format!("correct process {p} halted: {why}"));
            exit_code = EXIT_INTERNAL;
        }
        RunVerdict {
            exit_code,
            outcome: out.outcome,
            reasons,
            history,
            conflicting_certificates: conflicting,
            halted: out.halted.clone(),
            metrics: out.metrics.clone(),
        }
    }
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    schema: &'a str,
    version: u32,
    n: usize,
    t: usize,
    seed: u64,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    process: Option<ProcessId>,
    value: u64,
}

fn write_jsonl<T: Serialize>(path: &Path, header: Option<&impl Serialize>, items: &[T]) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    if let Some(h) = header {
        serde_json::to_writer(&mut w, h)?;
        writeln!(w)?;
    }
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics(path: &Path, m: &Metrics) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    let totals = [
        ("messages", m.messages),
        ("bytes", m.bytes),
        ("accounted_cost", m.accounted_cost),
        ("steps", m.steps),
        ("deliveries", m.deliveries),
        ("max_wait", m.max_wait),
        ("committed", m.committed),
        ("aborted", m.aborted),
        ("credited", m.credited),
    ];
    for (metric, value) in totals {
        w.serialize(MetricRow { metric, process: None, value })?;
    }
    for (p, &value) in m.storage.iter().enumerate() {
        w.serialize(MetricRow { metric: "storage_bytes", process: Some(p as ProcessId), value })?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `scenario` and writes the trace, event log, metrics and verdict into
/// `out_dir`, which is created if missing.
pub fn cmd_run(scenario: &Scenario, out_dir: &Path) -> Result<RunVerdict, HarnessError> {
    let out = run_with(scenario, RunOptions::default()).map_err(|e| HarnessError::Schema(e.to_string()))?;
    fs::create_dir_all(out_dir)?;
    let header = TraceHeader { schema: "qaat-trace", version: TRACE_VERSION, n: out.n, t: out.t, seed: scenario.seed };
    write_jsonl(&out_dir.join(RUN_FILES[0]), Some(&header), &out.trace)?;
    write_jsonl(&out_dir.join(RUN_FILES[1]), None::<&()>, &out.events)?;
    write_metrics(&out_dir.join(RUN_FILES[2]), &out.metrics)?;
    let verdict = RunVerdict::from_output(&out);
    write_json(Some(&out_dir.join(RUN_FILES[3])), &verdict)?;
    Ok(verdict)
}
