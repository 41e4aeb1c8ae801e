//! `mvoed` — command-line studies for risk-aware experimental design.
//!
//! Subcommands: `estimate` (one design), `sweep` (design grid),
//! `optimize` (Bayesian optimization), `convergence` (rate study),
//! `crs-study` (common-random-sampling smoothness), `pde-table`
//! (diffusion surrogate cache). Everything is seeded explicitly and
//! emits CSV, so runs are byte-reproducible.
//!
//! Exit codes: 0 success, 2 configuration error, 3 estimation error,
//! 4 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Estimation(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<mvoed::Error> for CliError {
    fn from(e: mvoed::Error) -> Self {
        use mvoed::Error as E;
        match e {
            E::Config(_) | E::DimensionMismatch { .. } | E::RejectionExhausted { .. }
            | E::CacheMismatch(_) => CliError::Config(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            E::Evaluation(_) | E::TooManyDegenerate { .. } | E::Estimation(_)
            | E::Numerical(_) => CliError::Estimation(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mvoed",
    version,
    about = "Risk-aware (mean-variance) Bayesian optimal experimental design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name: lingauss-1d | nonlinear-1d | nonlinear-2d |
    /// diffusion | diffusion-1s | diffusion-2s.
    #[arg(long)]
    model: Option<String>,
    /// Master seed (all randomness derives from explicit seeds).
    #[arg(long)]
    seed: Option<u64>,
    /// Outer Monte Carlo sample count N.
    #[arg(long)]
    n: Option<usize>,
    /// Inner sample count M1 (ignored under reuse).
    #[arg(long)]
    m1: Option<usize>,
    /// Inner sample count M2 (ignored under reuse).
    #[arg(long)]
    m2: Option<usize>,
    /// Disable sample reuse (independent inner loops).
    #[arg(long)]
    no_reuse: bool,
    /// Variance penalty lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Common-random-sampling seed: share one bank across all designs.
    #[arg(long)]
    crs_seed: Option<u64>,
    /// Evaluate outer samples on the thread pool (bit-identical output).
    #[arg(long)]
    parallel: bool,
    /// Obstacle spec file (TOML `[[obstacle]]` rectangles).
    #[arg(long)]
    obstacles: Option<PathBuf>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the objective decomposition at a single design.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Design coordinates, comma-separated (e.g. "0.2" or "0.2,0.8").
        #[arg(long)]
        xi: String,
    },
    /// Estimate over a design grid (one CSV row per grid point).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-dimension grid counts, e.g. "61" or "9x9".
        #[arg(long)]
        grid: String,
    },
    /// Maximize the penalized objective with Bayesian optimization.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluation budget after initialization.
        #[arg(long, default_value_t = 25)]
        budget: usize,
        /// Initial space-filling design count.
        #[arg(long, default_value_t = 5)]
        init: usize,
        /// UCB exploration weight.
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        /// Use expected improvement instead of UCB.
        #[arg(long)]
        ei: bool,
    },
    /// Replicate bias/variance rate study over a sample-size ladder.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Which estimate to track: uhat | vhat | jhat.
        #[arg(long, default_value = "vhat")]
        estimator: String,
        /// Design coordinates.
        #[arg(long)]
        xi: String,
        /// Comma-separated ladder, e.g. "100,316,1000,3162,10000".
        #[arg(long, default_value = "100,316,1000,3162,10000")]
        ladder: String,
        /// Replicates per rung.
        #[arg(long, default_value_t = 10)]
        replicates: usize,
    },
    /// Total-variation comparison of sweeps with and without CRS.
    CrsStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// 1D grid size over the design interval.
        #[arg(long, default_value_t = 61)]
        grid: usize,
    },
    /// Build (or refresh) the diffusion surrogate cache.
    PdeTable {
        /// Lattice resolution per parameter axis.
        #[arg(long, default_value_t = 21)]
        lattice: usize,
        /// Obstacle spec file.
        #[arg(long)]
        obstacles: Option<PathBuf>,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate { common, xi } => commands::cmd_estimate(&common, &xi),
        Command::Sweep { common, grid } => commands::cmd_sweep(&common, &grid),
        Command::Optimize {
            common,
            budget,
            init,
            kappa,
            ei,
        } => commands::cmd_optimize(&common, budget, init, kappa, ei),
        Command::Convergence {
            common,
            estimator,
            xi,
            ladder,
            replicates,
        } => commands::cmd_convergence(&common, &estimator, &xi, &ladder, replicates),
        Command::CrsStudy { common, grid } => commands::cmd_crs_study(&common, grid),
        Command::PdeTable {
            lattice,
            obstacles,
            out,
        } => commands::cmd_pde_table(lattice, obstacles.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
