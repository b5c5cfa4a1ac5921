//! Command-line driver: `train`, `sample`, `eval` and `selftest`.

mod commands;
pub mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_eval, cmd_sample, cmd_train};
pub use selftest::cmd_selftest;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration: exit 2.
    Config(String),
    /// Training or evaluation hit a non-finite value: exit 3.
    Numerical(String),
    /// File system failure: exit 4.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Numerical(m) => write!(f, "numerical abort: {m}"),
            Self::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cfgen::Error> for CliError {
    fn from(e: cfgen::Error) -> Self {
        use cfgen::Error as E;
        match e {
            E::NonFinite(_) | E::DegenerateCoordinate(_) => Self::Numerical(e.to_string()),
            E::Io(_) | E::Checkpoint(_) => Self::Io(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cfgen", version, about = "Train generators that match a characteristic function")]
pub struct Cli {
    /// Worker threads; 1 gives bitwise-reproducible parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a generator and write checkpoint, log and resolved config.
    Train(TrainArgs),
    /// Draw rows from a trained generator as CSV.
    Sample(SampleArgs),
    /// Compare a trained generator with its target.
    Eval(EvalArgs),
    /// Run the loss identity, gradient and kernel consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Resume from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Defaults to the checkpoint's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Checks the generator dimension against this experiment's target.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Report directory; defaults to `<output_dir>/eval`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draws per side; overrides `eval.sample_size`.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Selftest(a) => cmd_selftest(&a),
    }
}

pub fn main_with_args() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfgen: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
