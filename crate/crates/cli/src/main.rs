use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod problem;
mod render;

/// Free-energy decision making: solve, attack, sweep, sample and verify.
#[derive(Debug, Parser)]
#[command(name = "feg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium policy and free-energy decomposition as JSON.
    Solve(SolveArgs),
    /// Adversarial best-response costs and net utilities for a policy.
    Attack(AttackArgs),
    /// Certainty-equivalent and equilibrium across inverse temperatures, as CSV.
    Sweep(SweepArgs),
    /// Exact equilibrium samples by rejection from the prior.
    Sample(SampleArgs),
    /// Evaluate a nested decision tree.
    Tree(TreeArgs),
    /// Minmax and maxmax rules on a utility matrix.
    Game(GameArgs),
    /// Saddle point of the adversarial game for a regularizer.
    Dual(DualArgs),
    /// Check the closed forms against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct BetaArg {
    /// Override the file's inverse temperature.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
    #[command(flatten)]
    beta: BetaArg,
    /// Print the fully explicit problem file instead of solving.
    #[arg(long)]
    echo_canonical: bool,
}

#[derive(Debug, Args)]
struct AttackArgs {
    problem: PathBuf,
    #[command(flatten)]
    beta: BetaArg,
    /// Comma-separated weights, `equilibrium` or `prior`.
    #[arg(long, default_value = "equilibrium")]
    policy: String,
    /// Write a bar figure for the policy and the equilibrium.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    problem: PathBuf,
    /// Comma-separated β values.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "log_range"
    )]
    betas: Option<Vec<f64>>,
    /// `lo:hi:steps`, log-spaced between the positive β values lo and hi.
    #[arg(long)]
    log_range: Option<String>,
    /// Write a line plot of the sweep.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    problem: PathBuf,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper bound on the utilities; defaults to their maximum.
    #[arg(long, allow_negative_numbers = true)]
    bound: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    max_attempts: u64,
}

#[derive(Debug, Args)]
struct TreeArgs {
    tree: PathBuf,
}

#[derive(Debug, Args)]
struct GameArgs {
    problem: PathBuf,
}

#[derive(Debug, Args)]
struct DualArgs {
    problem: PathBuf,
    #[command(flatten)]
    beta: BetaArg,
    /// `kl`, `null`, `power:ALPHA[:SCALE]` or `quadratic:LAMBDA` (Σ from the file).
    #[arg(long, default_value = "kl")]
    reg: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    problem: PathBuf,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(
        long,
        hide = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    tamper_closed_form: f64,
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input or an invalid request: exit 2.
    Input(String),
    /// A verification or convergence failure: exit 3.
    Failure(String),
    /// Standard output was closed by the reader.
    Closed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 3,
            CliError::Closed => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
            CliError::Closed => f.write_str("output closed"),
        }
    }
}

impl From<feg_core::Error> for CliError {
    fn from(e: feg_core::Error) -> Self {
        match e {
            feg_core::Error::SamplerStalled { .. } => CliError::Failure(e.to_string()),
            feg_core::Error::BudgetExceeded(msg) => {
                CliError::Input(format!("oracle budget exceeded: {msg}"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Input(e.to_string())
    }
}

fn init_logging() {
    let level = match std::env::var("FEG_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a.problem, a.beta.beta, a.echo_canonical),
        Command::Attack(a) => {
            commands::attack(&a.problem, a.beta.beta, &a.policy, a.svg.as_deref())
        }
        Command::Sweep(a) => commands::sweep(
            &a.problem,
            a.betas,
            a.log_range.as_deref(),
            a.svg.as_deref(),
        ),
        Command::Sample(a) => commands::sample(
            &a.problem,
            a.beta.beta,
            commands::SampleOptions {
                count: a.count,
                seed: a.seed,
                bound: a.bound,
                max_attempts: a.max_attempts,
            },
        ),
        Command::Tree(a) => commands::tree(&a.tree),
        Command::Game(a) => commands::game(&a.problem),
        Command::Dual(a) => commands::dual(&a.problem, a.beta.beta, &a.reg, a.tol, a.max_iter),
        Command::Verify(a) => commands::verify(
            &a.problem,
            a.beta.beta,
            a.resolution,
            a.json,
            a.tamper_closed_form,
        ),
    };
    match result {
        Ok(()) | Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("feg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
