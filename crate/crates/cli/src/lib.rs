//! Library side of the `chiral-berry` command: configuration, command
//! runners, the verification battery and result export.
//!
//! ```text
//! chiral-berry <connection|curvature|phase|pumpprobe|verify> --config <path> [--out <dir>] [--threads N] [--seed S]
//! ```
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or I/O
//! error, 3 numeric precondition violated (pole, quadrature bound,
//! non-orthogonal transform, open loop).

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, Command, Outcome};
pub use config::RunConfig;
pub use output::{FileEntry, ResultManifest};
pub use verify::{SuiteResult, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Numeric(#[from] chiral_berry::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(chiral_berry::Error::InvalidArgument(_)) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chiral-berry", version, about = "Berry connection, curvature and geometric phases over light-polarization space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Grid of the connection components A_θ and A_φ.
    Connection(RunArgs),
    /// Gram tensor, channel vectors and curvature density grids.
    Curvature(RunArgs),
    /// Loop phases and the optional Stokes annulus report.
    Phase(RunArgs),
    /// Two-field connection split and curvature blocks.
    Pumpprobe(RunArgs),
    /// Identity and property battery; exits 1 if any suite fails.
    Verify(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "CHIRAL_BERRY_THREADS")]
    pub threads: Option<usize>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "chiral-berry-out";

impl CliCommand {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            CliCommand::Connection(a) => (Command::Connection, a),
            CliCommand::Curvature(a) => (Command::Curvature, a),
            CliCommand::Phase(a) => (Command::Phase, a),
            CliCommand::Pumpprobe(a) => (Command::Pumpprobe, a),
            CliCommand::Verify(a) => (Command::Verify, a),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Errors go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(outcome) if outcome.passed => 0,
        Ok(_) => {
            eprintln!("verification failed; see verify.json");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loads the config, applies overrides and runs in a dedicated thread pool.
pub fn execute(command: Command, args: &RunArgs) -> Result<Outcome, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run_command(command, &config, &out))
}
