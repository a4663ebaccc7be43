//! Command-line surface for the MaxEnt layer library: activation tables,
//! single saddle-point solves, manifold sampling, conditional-mean oracles,
//! autoencoder training, and reconstruction.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical infeasibility,
//! 4 training divergence.

mod commands;
mod io;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pbn",
    about = "MaxEnt-derived neural network layers: activations, saddle-point inversion, manifold sampling, and projected-belief-network autoencoders",
    version
)]
struct Cli {
    /// Reserved for a future configuration file; not yet supported
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate an activation function and its derivative on a theta grid
    Activations(ActivationsArgs),
    /// Solve the saddle-point equation W'lambda(theta0 + Wh) = z for h
    Invert(InvertArgs),
    /// Sample the posterior on the manifold {x : W'x = z} by hit-and-run
    Sample(SampleArgs),
    /// Brute-force conditional mean on the manifold (N - M <= 2)
    Oracle(OracleArgs),
    /// Train a projected-belief-network autoencoder by gradient descent
    Train(TrainArgs),
    /// Reconstruct inputs through the backward path of a trained model
    Reconstruct(ReconstructArgs),
}

#[derive(Args)]
pub struct ActivationsArgs {
    /// Activation kind: ted | tg | exp | linear
    #[arg(long)]
    pub kind: String,
    /// Smallest theta on the grid
    #[arg(long, allow_hyphen_values = true)]
    pub min: f64,
    /// Largest theta on the grid
    #[arg(long, allow_hyphen_values = true)]
    pub max: f64,
    /// Number of grid points
    #[arg(short = 'n', long = "points")]
    pub points: usize,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct InvertArgs {
    /// Weight matrix CSV (N rows, M columns)
    #[arg(long)]
    pub weights: String,
    /// Feature vector CSV (one row of M values)
    #[arg(long)]
    pub feature: String,
    /// Activation kind: ted | tg | exp | linear
    #[arg(long)]
    pub kind: String,
    /// Convergence tolerance on the sup-norm residual
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Inputs carry a single header row
    #[arg(long)]
    pub has_header: bool,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Weight matrix CSV (N rows, M columns)
    #[arg(long)]
    pub weights: String,
    /// Feature vector CSV (one row of M values)
    #[arg(long)]
    pub feature: String,
    /// Activation kind: ted | tg | exp | linear
    #[arg(long)]
    pub kind: String,
    /// Sweeps discarded before sampling starts
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Samples kept per chain
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Keep every thin-th sweep
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Number of independent chains (merged by chain index)
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// RNG seed; chain c uses sub-stream c
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inputs carry a single header row
    #[arg(long)]
    pub has_header: bool,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Weight matrix CSV (N rows, M columns, N - M <= 2)
    #[arg(long)]
    pub weights: String,
    /// Feature vector CSV (one row of M values)
    #[arg(long)]
    pub feature: String,
    /// Activation kind: ted | tg | exp | linear
    #[arg(long)]
    pub kind: String,
    /// Quadrature grid points per axis (clamped up to 2001)
    #[arg(long, default_value_t = 2001)]
    pub grid_points: usize,
    /// Inputs carry a single header row
    #[arg(long)]
    pub has_header: bool,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training data CSV, one sample per row
    #[arg(long)]
    pub data: String,
    /// Layer widths from input to deepest feature, e.g. 16-8-4
    #[arg(long)]
    pub arch: String,
    /// Activation kind applied to every layer: ted | tg | exp | linear
    #[arg(long)]
    pub kind: String,
    /// Gradient-descent epochs
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Gradient-descent step size
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// RNG seed for weight initialization
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inputs carry a single header row
    #[arg(long)]
    pub has_header: bool,
    /// Output path for the serialized model
    #[arg(long)]
    pub model_out: String,
    /// Output CSV path for the per-epoch loss trace
    #[arg(long)]
    pub trace_out: String,
}

#[derive(Args)]
pub struct ReconstructArgs {
    /// Serialized model path
    #[arg(long)]
    pub model: String,
    /// Input data CSV, one sample per row
    #[arg(long)]
    pub data: String,
    /// deterministic | stochastic
    #[arg(long, default_value = "deterministic")]
    pub mode: String,
    /// RNG seed for stochastic mode
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inputs carry a single header row
    #[arg(long)]
    pub has_header: bool,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

/// CLI failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    pub fn input(message: String) -> Self {
        CliError { message, code: 2 }
    }

    pub fn infeasible(message: String) -> Self {
        CliError { message, code: 3 }
    }
}

impl From<pbn_core::Error> for CliError {
    fn from(e: pbn_core::Error) -> Self {
        use pbn_core::Error::*;
        let code = match e {
            InfeasibleStart(_) | ReconstructionInfeasible { .. } => 3,
            TrainingDiverged { .. } => 4,
            _ => 2,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.config.is_some() {
        eprintln!("error: --config is reserved and not yet supported; use flags");
        std::process::exit(2);
    }
    let result = match &cli.command {
        Command::Activations(args) => commands::cmd_activations(args),
        Command::Invert(args) => commands::cmd_invert(args),
        Command::Sample(args) => commands::cmd_sample(args),
        Command::Oracle(args) => commands::cmd_oracle(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Reconstruct(args) => commands::cmd_reconstruct(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
