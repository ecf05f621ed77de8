use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qaat_core::anonymity::Experiment;
use qaat_core::predicate::Backend;
use qaat_core::sim::{GroupMode, Scenario};
use qaat_harness::bench::format_table;
use qaat_harness::sweep::write_sweep_csv;
use qaat_harness::{
    cmd_anonymity, cmd_bench, cmd_run, cmd_sweep, load_scenario, parse_backend, parse_group, write_json, AnonymityArgs, Axis,
    HarnessError, Overrides, BENCH_SIZES, EXIT_OK, EXIT_VIOLATION,
};

#[derive(Parser)]
#[command(name = "qaat", version, about = "Simulate and check consensus-free asset transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Copy)]
struct OverrideArgs {
    /// Replaces the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    #[arg(long, value_parser = parse_group)]
    group: Option<GroupMode>,
    #[arg(long)]
    step_limit: Option<u64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides { seed: a.seed, backend: a.backend, group: a.group, step_limit: a.step_limit }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Receiver,
    Amount,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    N,
    Transfers,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.jsonl, events.jsonl, metrics.csv and verdict.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a generated all-correct workload for each value of one axis and print CSV.
    Sweep {
        /// Supplies seed, backend, group and scheduling; defaults otherwise.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated axis values; may be empty.
        #[arg(long, value_parser = parse_values, num_args = 0..=1, default_value = "", default_missing_value = "")]
        values: AxisValues,
        /// Process count when sweeping transfers.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Transfer count when sweeping n.
        #[arg(long, default_value_t = 1)]
        transfers: usize,
        /// Seeds per value.
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// CSV file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Paired-trace anonymity experiment on a template scenario. Exits 1 if leaking.
    Anonymity {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "receiver")]
        experiment: ExperimentArg,
        /// Replacement amount for the amount experiment.
        #[arg(long)]
        alternative: Option<u64>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        /// JSON report file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Accumulator timings for set sizes 100 to 2000. Informational.
    Bench {
        #[arg(long, value_parser = parse_group, default_value = "toy")]
        group: GroupMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON rows file; a table goes to stdout regardless.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone)]
struct AxisValues(Vec<u64>);

fn parse_values(s: &str) -> Result<AxisValues, String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()
        .map(AxisValues)
}

fn first_transfer_amount(s: &Scenario) -> Option<u64> {
    s.operations.iter().find_map(|o| match o.op {
        qaat_core::sim::OpKind::Transfer { amount, .. } => Some(amount),
        _ => None,
    })
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Run { scenario, out, overrides } => {
            let s = load_scenario(&scenario, &overrides.into())?;
            let verdict = cmd_run(&s, &out)?;
            for r in &verdict.reasons {
                eprintln!("{r}");
            }
            println!("{:?}: exit {} (results in {})", verdict.outcome, verdict.exit_code, out.display());
            Ok(verdict.exit_code)
        }
        Command::Sweep { scenario, axis, values, n, transfers, trials, out, overrides } => {
            let overrides: Overrides = overrides.into();
            let base = match scenario {
                Some(p) => load_scenario(&p, &overrides)?,
                None => {
                    let mut s = Scenario::new(0, vec![0], 0);
                    overrides.apply(&mut s);
                    s
                }
            };
            let axis = match axis {
                AxisArg::N => Axis::N,
                AxisArg::Transfers => Axis::Transfers,
            };
            let rows = cmd_sweep(&base, axis, &values.0, n, transfers, trials)?;
            match out {
                Some(p) => write_sweep_csv(fs::File::create(p)?, &rows)?,
                None => write_sweep_csv(io::stdout().lock(), &rows)?,
            }
            Ok(EXIT_OK)
        }
        Command::Anonymity { scenario, experiment, alternative, trials, out, overrides } => {
            let overrides: Overrides = overrides.into();
            let template = load_scenario(&scenario, &overrides)?;
            let experiment = match experiment {
                ExperimentArg::Receiver => Experiment::Receiver,
                ExperimentArg::Amount => {
                    let current = first_transfer_amount(&template)
                        .ok_or_else(|| HarnessError::Usage("template has no transfer".into()))?;
                    Experiment::Amount { alternative: alternative.unwrap_or(current + 2) }
                }
            };
            let report = cmd_anonymity(&template, AnonymityArgs { experiment, trials, first_seed: template.seed })?;
            write_json(out.as_deref(), &report)?;
            Ok(if report.leaking { EXIT_VIOLATION } else { EXIT_OK })
        }
        Command::Bench { group, seed, out } => {
            let rows = cmd_bench(group, &BENCH_SIZES, seed)?;
            print!("{}", format_table(&rows));
            if let Some(p) = out {
                write_json(Some(&p), &rows)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
