use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::{Flags, RunConfig};

/// Exact enumeration, Monte Carlo and scaling sweeps for one-dimensional
/// self-repellent polymers.
#[derive(Debug, Parser)]
#[command(name = "polymerlab", version = output::VERSION_STAMP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Beta,
    Sigma,
    Coupled,
    Attraction,
    Strip,
    Flory,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact polymer measure of all n-step paths.
    Enumerate,
    /// PERM or importance-sampling estimates with replica error bars.
    Mc,
    /// Finite-n rate function on a grid of speeds.
    Rate,
    /// B_n and E(G_n) from return probabilities.
    LemmaBn,
    /// Piece expansion: c_N, pi_m, eps, renewal residuals and z.
    Renewal,
    /// Scaling sweep towards the weak-interaction limit.
    Sweep {
        #[arg(value_enum)]
        experiment: SweepKind,
    },
    /// Exact-identity checks; exits nonzero on any failure.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(polymerlab::Error),
    Io(std::io::Error),
    /// A check failed that should hold exactly.
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use polymerlab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidDistribution(_) | E::InvalidParameter(_) | E::InvalidSchedule(_)) => 2,
            CliError::Core(E::InsufficientReplicas { .. }) => 2,
            CliError::Core(E::Budget { .. }) => 3,
            CliError::Core(E::Invariant(_)) | CliError::Failed(_) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Failed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<polymerlab::Error> for CliError {
    fn from(e: polymerlab::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Thread count from POLYMERLAB_THREADS, else `--threads`. Rayon reads
/// RAYON_NUM_THREADS when its pool starts, which has not happened yet.
fn configure_threads(cfg: &mut RunConfig) -> Result<(), CliError> {
    if let Ok(v) = std::env::var("POLYMERLAB_THREADS") {
        let t: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("POLYMERLAB_THREADS={v:?} is not a count")))?;
        cfg.threads = Some(t);
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        std::env::set_var("RAYON_NUM_THREADS", t.to_string());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.overlay(&cli.flags);
    configure_threads(&mut cfg)?;
    match cli.command {
        Command::Enumerate => commands::enumerate(cfg),
        Command::Mc => commands::mc(cfg),
        Command::Rate => commands::rate(cfg),
        Command::LemmaBn => commands::lemma_bn(cfg),
        Command::Renewal => commands::renewal(cfg),
        Command::Sweep { experiment } => commands::sweep(cfg, experiment),
        Command::Selftest => commands::selftest(cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polymerlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
