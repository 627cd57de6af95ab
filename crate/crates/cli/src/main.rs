mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use saqc_core::dynamics::GuessPolicy;
use saqc_core::error::Error as CoreError;
use saqc_core::experiments::GroupKey;
use saqc_core::hamiltonian::Mode;
use saqc_core::sat::Assignment;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_GENERATION: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

/// Bad command-line input that clap cannot catch on its own.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(name = "saqc", version, about = "Guess-seeded and conventional adiabatic evolution on random 3-SAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate 3-SAT instances with a unique satisfying assignment.
    Gen(GenArgs),
    /// Scan the spectral gap along one schedule.
    Gap(GapArgs),
    /// Run a gap sweep over instances, guesses and driver strengths.
    Sweep(SweepArgs),
    /// Summarize sweep rows: grouped medians or probability curves.
    Stats(StatsArgs),
    /// Integrate the Schrödinger equation along a schedule.
    Propagate(PropagateArgs),
    /// Simulate repeated guess-seeded runs with restarts.
    Restart(RestartArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("amount").required(true).args(["count", "cover"])))]
pub struct GenArgs {
    /// Variables per instance.
    #[arg(long)]
    pub n: usize,
    /// Clauses per instance [default: round(4.26 n)].
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of independently drawn instances.
    #[arg(long)]
    pub count: Option<usize>,
    /// One instance for every possible solution (2^n instances).
    #[arg(long)]
    pub cover: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// DIMACS instance file.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "saqc")]
    pub mode: Mode,
    /// Guess as a bitstring x_n…x_1 (SAQC only).
    #[arg(long)]
    pub guess: Option<Assignment>,
    /// Driver strength δ.
    #[arg(long, default_value_t = 1.5)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Uniform grid points on [0, 1] before refinement.
    #[arg(long, default_value_t = saqc_core::spectral::DEFAULT_GRID_POINTS)]
    pub grid: usize,
    /// Skip the transition matrix element.
    #[arg(long)]
    pub no_epsilon: bool,
    /// Gap curve CSV (s,e0,e1,gap).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: desk6, desk7, full6, full7.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of instances.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Draw instances independently instead of with distinct solutions.
    #[arg(long)]
    pub independent: bool,
    /// `all` or a number of random guesses per instance.
    #[arg(long)]
    pub guesses: Option<String>,
    /// Comma-separated driver strengths.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<Mode>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "SAQC_JOBS")]
    pub jobs: Option<usize>,
    /// JSON-lines checkpoint; finished rows found there are reused.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("summary").required(true).args(["group", "curves"])))]
pub struct StatsArgs {
    /// Sweep rows CSV.
    #[arg(long)]
    pub rows: PathBuf,
    /// Median SAQC g_min per (group, δ): bf or uc.
    #[arg(long)]
    pub group: Option<GroupKey>,
    /// Probability of SAQC beating CAQC per (criterion, δ).
    #[arg(long)]
    pub curves: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Comma-separated evolution times.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
    /// Fixed step count instead of error control.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = saqc_core::dynamics::DEFAULT_STEP_TOLERANCE)]
    pub tolerance: f64,
    /// Trajectory CSV (s,success_probability,norm); needs a single τ.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, env = "SAQC_JOBS")]
    pub jobs: Option<usize>,
    /// JSON lines, one per τ.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RestartArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// refine: restart from the measured bitstring; random: from a fresh one.
    #[arg(long, default_value = "refine")]
    pub mode: GuessPolicy,
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    #[arg(long)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// First guess for every trial; drawn per trial when absent.
    #[arg(long)]
    pub guess: Option<Assignment>,
    #[arg(long, env = "SAQC_JOBS")]
    pub jobs: Option<usize>,
    /// JSON lines, one per trial.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Input(_) | CoreError::Capacity { .. } | CoreError::Unsupported(_) => EXIT_USAGE,
                CoreError::Parse { .. } | CoreError::Json(_) | CoreError::Csv(_) => EXIT_PARSE,
                CoreError::GenerationFailure { .. } | CoreError::PartialCover { .. } => EXIT_GENERATION,
                CoreError::Accuracy(_) | CoreError::DegenerateGap(_) => EXIT_NUMERICAL,
                CoreError::State(_) | CoreError::Io(_) => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_PARSE;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Gap(a) => commands::gap(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Stats(a) => commands::stats(a),
        Command::Propagate(a) => commands::propagate(a),
        Command::Restart(a) => commands::restart(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
