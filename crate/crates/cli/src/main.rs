//! `stablefield` command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration or input problems, 3 for
//! numerical failures. Every failure ends with one machine-readable line on
//! stderr of the form `error kind=<config|numerical> code=<n> message="..."`.

mod commands;
mod config;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "stablefield", version, about = "Simulate and extrapolate alpha-stable random fields")]
pub struct Cli {
    /// Plain-text `key = value` file; keys are long flag names. Flags given
    /// on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate realizations on a grid or at given sites.
    Simulate(SimulateArgs),
    /// Compute predictor weights and predicted values from observations.
    Predict(PredictArgs),
    /// Covariation matrix of a set of sites.
    Covariation(CovariationArgs),
    /// Monte Carlo comparison of the extrapolation methods.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    LevySheet,
    MovingAverage,
    OrnsteinUhlenbeck,
    SubGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CovarianceName {
    Gaussian,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Triangle,
    Epanechnikov,
    Box,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Stability index in (1, 2].
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// Covariance at lag zero of the Gaussian part (sub-Gaussian models).
    #[arg(long, default_value_t = 7.0)]
    pub sill: f64,
    /// Covariance range of the Gaussian part (sub-Gaussian models).
    #[arg(long, default_value_t = 0.1)]
    pub range: f64,
    #[arg(long, value_enum, default_value_t = CovarianceName::Gaussian)]
    pub covariance: CovarianceName,
    /// Moving-average kernel shape.
    #[arg(long, value_enum, default_value_t = KernelName::Triangle)]
    pub kernel: KernelName,
    /// Moving-average kernel support radius.
    #[arg(long, default_value_t = 0.1)]
    pub radius: f64,
    /// Ornstein-Uhlenbeck rate.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Spatial dimension of kernel fields (Ornstein-Uhlenbeck is always 1).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Integration cells per axis for kernel fields.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Lower corner of the integration domain (same value on every axis).
    #[arg(long, allow_negative_numbers = true)]
    pub domain_lower: Option<f64>,
    /// Upper corner of the integration domain (same value on every axis).
    #[arg(long, allow_negative_numbers = true)]
    pub domain_upper: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub gradient_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Distance under which a target is treated as an observation site.
    #[arg(long, default_value_t = 1e-12)]
    pub snap_tol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub min_rcond: f64,
    /// Diagonal jitter relative to `C(0)` for covariance factorizations.
    #[arg(long, default_value_t = 1e-10)]
    pub jitter: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Replace existing output files instead of refusing to run.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Simulate at `i/N` (per axis) for `i = 1..N`.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Inline sites `x[,y];x[,y];...`, replacing the grid.
    #[arg(long, allow_hyphen_values = true)]
    pub sites: Option<String>,
    /// CSV of sites with header `x` or `x,y`, replacing the grid.
    #[arg(long)]
    pub sites_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of realizations; realization `k` uses stream `k`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub jitter: f64,
    #[arg(long, default_value = "realization")]
    pub prefix: String,
    /// Also write a gnuplot script for the first realization.
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Observations CSV with header `x,value` or `x,y,value`.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Inline targets `x[,y];x[,y];...`.
    #[arg(long, allow_hyphen_values = true)]
    pub targets: Option<String>,
    /// CSV of targets with header `x` or `x,y`.
    #[arg(long)]
    pub targets_file: Option<PathBuf>,
    /// Targets `i/N` (per axis) for `i = 1..N`.
    #[arg(long)]
    pub target_grid: Option<usize>,
    /// Methods among lsl, col, mcl, ml and cs (default: every method
    /// applicable to the model).
    #[arg(long, alias = "method", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Seed for conditional simulation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CovariationArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Inline sites `x[,y];x[,y];...`.
    #[arg(long, allow_hyphen_values = true)]
    pub sites: Option<String>,
    /// CSV of sites with header `x` or `x,y`.
    #[arg(long)]
    pub sites_file: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pub realizations: usize,
    /// Evaluation grid `(i/N, j/N)`, `i, j = 1..N`.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Methods to compare (default: LSL, MCL, CS for sub-Gaussian fields and
    /// LSL, COL, MCL otherwise).
    #[arg(long, alias = "method", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Observation sites `x,y;x,y;...` (default: the nine points with
    /// coordinates in {0.2, 0.5, 0.8}).
    #[arg(long)]
    pub sites: Option<String>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Write surface CSVs and a gnuplot script for the first realization.
    #[arg(long)]
    pub panels: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<stablefield::Error> for Failure {
    fn from(e: stablefield::Error) -> Self {
        if e.is_input_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn report(f: &Failure) -> ExitCode {
    let (kind, message) = match f {
        Failure::Config(m) => ("config", m),
        Failure::Numerical(m) => ("numerical", m),
    };
    eprintln!("error kind={kind} code={} message={message:?}", f.code());
    ExitCode::from(f.code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match config::parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(config::ParseFailure::Clap(e)) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            return report(&Failure::Config(e.kind().to_string()));
        }
        Err(config::ParseFailure::Config(m)) => return report(&Failure::Config(m)),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(&Failure::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&Failure::Config(e.to_string()));
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Covariation(a) => commands::covariation(a),
        Command::Benchmark(a) => commands::benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
