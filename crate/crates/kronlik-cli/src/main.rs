//! kronlik: estimation, uniqueness diagnosis and simulation for
//! matrix-normal models with a Kronecker product covariance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

/// Exit codes: 0 success, 1 usage or IO, 2 numerical failure,
/// 3 existence/uniqueness refusal.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_REFUSAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kronlik",
    version,
    about = "Kronecker-covariance maximum likelihood toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a matrix-normal model with Psi ⊗ Gamma covariance
    Simulate(SimulateArgs),
    /// Fit a model to a dataset file
    Estimate(EstimateArgs),
    /// Classify uniqueness of the MLE for an n=3, 2x2 dataset
    Diagnose(DiagnoseArgs),
    /// Monte Carlo estimate of the non-uniqueness probability (n = 3)
    Probability(ProbabilityArgs),
    /// Enumerate maximizer-family members of a non-unique dataset
    Family(FamilyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Rows of each observation
    #[arg(long)]
    p: usize,
    /// Columns of each observation
    #[arg(long)]
    q: usize,
    /// Number of observations
    #[arg(long)]
    n: usize,
    /// File with the p x p Gamma component
    #[arg(long)]
    gamma: PathBuf,
    /// File with the q x q Psi component
    #[arg(long)]
    psi: PathBuf,
    /// Optional p x q mean matrix file (default: zero mean)
    #[arg(long)]
    mean: Option<PathBuf>,
    /// RNG seed (falls back to KRONLIK_SEED, then 0)
    #[arg(long, env = "KRONLIK_SEED", default_value_t = 0)]
    seed: u64,
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input dataset file
    #[arg(long = "in")]
    input: PathBuf,
    /// Model: general, diagonal or one-diag
    #[arg(long, default_value = "general")]
    model: commands::Model,
    /// File with an initial q x q Psi (general and one-diag models)
    #[arg(long)]
    init_psi: Option<PathBuf>,
    /// Convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Input dataset file (n = 3, p = q = 2)
    #[arg(long = "in")]
    input: PathBuf,
    /// Write a (b, g, h1, h2, sign W) table to this file
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Curve grid lower end (default: derived from the classification)
    #[arg(long, allow_hyphen_values = true)]
    b_min: Option<f64>,
    /// Curve grid upper end (default: derived from the classification)
    #[arg(long, allow_hyphen_values = true)]
    b_max: Option<f64>,
    /// Curve grid size
    #[arg(long, default_value_t = 201)]
    b_steps: usize,
    /// Refusal band on |disc(W)| relative to the V scale
    #[arg(long, default_value_t = kronlik::DEFAULT_BORDERLINE_EPS)]
    borderline_eps: f64,
    /// Also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbabilityArgs {
    /// File with the 2 x 2 Gamma component
    #[arg(long)]
    gamma: PathBuf,
    /// File with the 2 x 2 Psi component
    #[arg(long)]
    psi: PathBuf,
    /// Number of replications (>= 100)
    #[arg(long)]
    reps: usize,
    /// RNG seed (falls back to KRONLIK_SEED, then 0)
    #[arg(long, env = "KRONLIK_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = rayon default); the result does not depend on it
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FamilyArgs {
    /// Input dataset file (n = 3, p = q = 2, non-unique)
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated b values strictly inside the non-uniqueness interval
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b_values: Option<Vec<f64>>,
    /// Number of evenly spaced interior members when --b-values is absent
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Also write the report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version through the error path with exit 0
            let code = if err.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Diagnose(args) => commands::diagnose(&args),
        Command::Probability(args) => commands::probability(&args),
        Command::Family(args) => commands::family(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// CLI-level error: a library error or an IO failure, each carrying its exit
/// code category.
#[derive(Debug)]
pub enum CliError {
    Lib(kronlik::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<kronlik::Error> for CliError {
    fn from(e: kronlik::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use kronlik::Error::*;
        match self {
            CliError::Io(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Parse { .. }
                | DimensionMismatch(_)
                | WrongShape(_)
                | InsufficientData
                | NotSymmetric(_)
                | NotInInterval(_) => EXIT_USAGE,
                NotPositiveDefinite(_)
                | SingularDifference(_)
                | ZeroResidualCell { .. }
                | DegenerateDenominator
                | PoleOnGrid(_)
                | RootNotBracketed => EXIT_NUMERICAL,
                ExistenceRuledOut { .. } | ExistenceNotGuaranteed { .. } | NotNonUnique => {
                    EXIT_REFUSAL
                }
            },
        }
    }
}
