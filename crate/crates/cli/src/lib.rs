//! The `aerofd` command line: track, fd, simulate, eval and run.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 internal error.

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "aerofd", version, about = "Vehicle tracking and fundamental diagrams from aerial detections")]
pub struct Cli {
    /// More progress output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Suppress the summary on stdout.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track detections and write tracks.csv and frame_stats.csv.
    Track(TrackArgs),
    /// Fit the speed-density relation and write the FD tables and plots.
    Fd(FdArgs),
    /// Generate a synthetic detection stream and its ground truth.
    Simulate(SimulateArgs),
    /// Score tracker output against ground truth.
    Eval(EvalArgs),
    /// Track, compute statistics and fit the FD in one go.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["stats", "tracks"])))]
pub struct FdArgs {
    /// A frame_stats.csv written by `track` or `run`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// A tracks.csv; statistics are recomputed with the config's segment.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("scale").required(true).args(["config", "scenario"])))]
pub struct EvalArgs {
    /// Ground truth in detection-CSV layout with real ids.
    #[arg(long)]
    pub truth: PathBuf,
    /// A tracks.csv, or a detection-CSV file with ids.
    #[arg(long)]
    pub tracks: PathBuf,
    /// Supplies the camera (for speeds) and FD settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// The scenario behind the truth; also enables the FD error terms.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Also write eval.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["detections", "scenario"])))]
pub struct RunArgs {
    #[arg(long, requires = "config")]
    pub detections: Option<PathBuf>,
    /// Simulate this scenario and score the result against its truth.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long, requires = "scenario", conflicts_with = "detections")]
    pub seed: Option<u64>,
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

pub(crate) fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

pub(crate) fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

/// Verbosity-aware output.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ui {
    verbose: u8,
    quiet: bool,
}

impl Ui {
    pub(crate) fn progress(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub(crate) fn summary(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let ui = Ui {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Track(a) => commands::track(a, ui),
        Command::Fd(a) => commands::fd(a, ui),
        Command::Simulate(a) => commands::simulate(a, ui),
        Command::Eval(a) => commands::eval(a, ui),
        Command::Run(a) => commands::run(a, ui),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(Failure::Input(e))) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
        Ok(Err(Failure::Internal(e))) => {
            eprintln!("internal error: {e:#}");
            EXIT_INTERNAL
        }
        Err(_) => EXIT_INTERNAL,
    }
}
