mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use jetmod_core::{Error as CoreError, ParseError};

/// Jet kernels, bundle curvature and unitary-equivalence tests for quotient Hilbert modules.
#[derive(Debug, Parser)]
#[command(name = "jetmod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Curvature matrices and their identity residuals at a list of points.
    Curvature(Common),
    /// Jet kernel JK(z, z) with its multi-index legend.
    Jetkernel {
        #[command(flatten)]
        common: Common,
        /// Require the points to lie on the submanifold {u_1 = .. = u_d = 0}.
        #[arg(long)]
        restrict: bool,
    },
    /// Decide unitary equivalence of the quotient modules of two kernels.
    Equiv {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Criterion::Auto)]
        criterion: Criterion,
    },
    /// Recover weighted Bergman weights from curvature along the diagonal.
    RecoverWeights {
        #[command(flatten)]
        common: Common,
        /// Comma-separated positive weights.
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// Diagonal quotient of the tri-disc: explicit orthonormal basis against the jet kernel.
    QuotientDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
        weights: Vec<f64>,
        /// Diagonal coordinate, a complex literal such as `0.3` or `0.1+0.2i`.
        #[arg(long, default_value = "0.3")]
        z: String,
        /// Highest homogeneous degree kept in the basis expansion.
        #[arg(long, default_value_t = 60)]
        pmax: usize,
        /// Degrees shown in the norm table.
        #[arg(long, default_value_t = 12)]
        levels: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Criterion {
    Auto,
    Rank1,
    Rankr,
    Mthm,
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    kernel2: Option<PathBuf>,
    /// `identity(m[, d])`, `diagonal(m)` or `affine(d; rows | ... ; offset)`.
    #[arg(long)]
    chart: Option<String>,
    #[arg(short = 'd')]
    d: Option<usize>,
    #[arg(short = 'k', default_value_t = 2)]
    k: usize,
    /// Points separated by `;`, coordinates by `,`.
    #[arg(long, conflicts_with_all = ["seed", "num_samples"])]
    points: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trunc: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{}:{}: {}", .source.line, .source.column, .source.message)]
    Parse { path: String, source: ParseError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("could not encode report: {0}")]
    Encode(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Core(CoreError::Parse(_)) => 2,
            CliError::Core(_) | CliError::Encode(_) => 1,
        }
    }
}

/// Outcome of a command, mapped onto the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    NotEquivalent,
    Inconclusive,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::NotEquivalent => 3,
            Outcome::Inconclusive => 4,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("JETMOD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("JETMOD_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("could not size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Curvature(common) => commands::curvature(&common),
        Command::Jetkernel { common, restrict } => commands::jetkernel(&common, restrict),
        Command::Equiv { common, criterion } => commands::equiv(&common, criterion),
        Command::RecoverWeights { common, weights } => commands::recover_weights(&common, &weights),
        Command::QuotientDemo { common, weights, z, pmax, levels } => {
            commands::quotient_demo(&common, &weights, &z, pmax, levels)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
