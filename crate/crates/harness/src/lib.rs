//! Library behind the `qaat` command: scenario runs, parameter sweeps,
//! anonymity experiments and accumulator benchmarks.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use qaat_core::predicate::Backend;
use qaat_core::sim::{GroupMode, Scenario};

pub mod anonymity;
pub mod bench;
pub mod run;
pub mod sweep;

pub use anonymity::{cmd_anonymity, AnonymityArgs};
pub use bench::{cmd_bench, format_table, BenchRow, BENCH_SIZES};
pub use run::{cmd_run, RunVerdict, RUN_FILES};
pub use sweep::{cmd_sweep, workload, write_sweep_csv, Axis, SweepRow, SWEEP_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub enum HarnessError {
    /// Bad command-line input.
    Usage(String),
    /// Scenario file that does not parse or validate.
    Schema(String),
    Io(io::Error),
    Internal(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Schema(_) => EXIT_USAGE,
            HarnessError::Io(_) | HarnessError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Usage(m) => write!(f, "usage error: {m}"),
            HarnessError::Schema(m) => write!(f, "schema error: {m}"),
            HarnessError::Io(e) => write!(f, "i/o error: {e}"),
            HarnessError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<io::Error> for HarnessError {
    fn from(e: io::Error) -> Self {
        HarnessError::Io(e)
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Internal(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Internal(format!("json: {e}"))
    }
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub group: Option<GroupMode>,
    pub step_limit: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(b) = self.backend {
            s.backend = b;
        }
        if let Some(g) = self.group {
            s.group = g;
        }
        if let Some(l) = self.step_limit {
            s.step_limit = Some(l);
        }
    }
}

pub fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "transparent" => Ok(Backend::Transparent),
        "ideal-zk" => Ok(Backend::IdealZk),
        _ => Err(format!("unknown backend `{s}`, expected transparent or ideal-zk")),
    }
}

pub fn parse_group(s: &str) -> Result<GroupMode, String> {
    match s {
        "toy" => Ok(GroupMode::Toy),
        "rsa2048" => Ok(GroupMode::Rsa2048),
        _ => Err(format!("unknown group `{s}`, expected toy or rsa2048")),
    }
}

/// Parses and validates a scenario, with overrides applied before validation.
pub fn parse_scenario(text: &str, overrides: &Overrides) -> Result<Scenario, HarnessError> {
    let mut s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
    overrides.apply(&mut s);
    s.validate().map_err(|e| HarnessError::Schema(e.to_string()))?;
    Ok(s)
}

pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, overrides).map_err(|e| match e {
        HarnessError::Schema(m) => HarnessError::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes `value` as pretty JSON to `path`, or to stdout when `path` is `None`.
pub fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), HarnessError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}
