//! `mmev-lab`: ingest relay traces, find consecutive-block runs, compare them
//! with the Bernoulli expectation, simulate PBS auctions and replay the AMM
//! momentum play.
//!
//! Exit codes: 0 success, 1 input errors, 2 configuration or usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmev_core::report::OutputFormat;
use mmev_core::trace_model::DenominatorMode;

pub const TOOL: &str = "mmev-lab";
pub const THREADS_ENV: &str = "MMEV_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Multi-block MEV analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate bid or slot-outcome files and write normalised copies.
    Ingest(IngestArgs),
    /// Detect maximal runs and write run, histogram and payment tables.
    Runs(RunsArgs),
    /// Monte Carlo expectation of run counts.
    Expected(ExpectedArgs),
    /// Observed run counts against the expectation.
    Compare(CompareArgs),
    /// Simulate the PBS auction and write a synthetic trace.
    Simulate(SimulateArgs),
    /// Replay the momentum strategy on a scenario file.
    Momentum(MomentumArgs),
    /// Full report over a slot-outcome trace.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Table format.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Slot-outcome trace (CSV or JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Entity map (`pubkey=name` lines). Defaults to the built-in builder list.
    #[arg(long)]
    entities: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Bid or slot-outcome files; the kind is read from the header.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RunsArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Bid records, for baselines and escalation indices.
    #[arg(long)]
    bids: Option<PathBuf>,
    /// Minimum run length for the payment-by-position table.
    #[arg(long, default_value_t = 2)]
    min_length: usize,
    /// Escalation slope above which a run is flagged.
    #[arg(long, default_value_t = mmev_core::run_analysis::DEFAULT_ESCALATION_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ExpectedArgs {
    /// Slot-outcome trace to take market shares from.
    #[arg(long, conflicts_with = "p")]
    input: Option<PathBuf>,
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Share denominator: all slots or PBS slots only.
    #[arg(long, default_value = "all")]
    denominator: DenominatorMode,
    /// A single success probability instead of a trace.
    #[arg(long, requires = "slots")]
    p: Option<f64>,
    /// Number of slots per trial (with --p).
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long, default_value_t = mmev_core::run_expectation::DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, default_value_t = mmev_core::run_expectation::DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Expected table (expected.csv).
    #[arg(long)]
    expected: PathBuf,
    /// Observed histogram (histogram.csv).
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    observed: Option<PathBuf>,
    /// Slot-outcome trace to count runs from instead of a histogram.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Compare only k up to this length.
    #[arg(long)]
    kmax: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config (.json, or the key = value text format).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's.
    #[arg(long)]
    seed: u64,
    /// Trace format for bids and outcomes.
    #[arg(long, default_value = "csv")]
    trace_format: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct MomentumArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[arg(long)]
    bids: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    denominator: DenominatorMode,
    #[arg(long, default_value_t = mmev_core::run_expectation::DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, default_value_t = mmev_core::run_expectation::DEFAULT_TRIALS)]
    trials: u64,
    /// Seed for the expectation; defaults to 0.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

/// Why a command failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

pub trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn config(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(anyhow::anyhow!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .config()
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Runs(a) => commands::runs(a),
        Command::Expected(a) => commands::expected(a),
        Command::Compare(a) => commands::compare(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Momentum(a) => commands::momentum(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Config(e)) = &f;
            eprintln!("{TOOL}: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
