use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cutcd::{CutoffRule, Factor, SolverKind, ValueMode};

#[derive(Debug, Parser)]
#[command(
    name = "cutcd",
    version,
    about = "Sparse nonnegative coupled matrix-tensor factorization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic tensor and side matrix.
    Synth(SynthArgs),
    /// Fit a model with one solver.
    Fit(FitArgs),
    /// Sweep one data parameter across solvers and repeats.
    Bench(BenchArgs),
    /// Evaluate a saved model.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Mode lengths J,K,L,M.
    #[arg(long, value_parser = parse_dims)]
    pub dims: (usize, usize, usize, usize),
    /// Fraction of tensor cells observed.
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value = "planted", value_parser = parse_mode)]
    pub mode: ValueMode,
    /// Rank of the planted factors.
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    /// Gaussian noise on planted values.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold out this fraction of the entries as test.coo.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Relative objective change that stops iteration; 0 runs to the cap.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Seed of the random initial factors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// L2,1 weight, accepted by cutcd-sc only.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Inner iterations per column for ccdpp.
    #[arg(long, default_value_t = 1)]
    pub ccd_inner: usize,
    /// `mean` or `fixed:C` with C in [0, 1].
    #[arg(long, default_value = "mean", value_parser = parse_cutoff)]
    pub cutoff: CutoffRule,
    /// Greedy updates per row for gcd; defaults to the rank.
    #[arg(long)]
    pub gcd_max_inner: Option<usize>,
    /// Initial factors are uniform in [0, scale).
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_solver)]
    pub solver: SolverKind,
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    pub solver_args: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    /// Common length of the three tensor modes.
    Mode,
    Density,
    /// Planted and fitted rank together.
    Rank,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub vary: Vary,
    /// Comma-separated values of the varied parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_solver, default_value = "cutcd,gcd,ccdpp,als")]
    pub solvers: Vec<SolverKind>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Base mode lengths J,K,L,M.
    #[arg(long, value_parser = parse_dims, default_value = "256,256,256,64")]
    pub dims: (usize, usize, usize, usize),
    #[arg(long, default_value_t = 1e-3)]
    pub density: f64,
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value = "planted", value_parser = parse_mode)]
    pub mode: ValueMode,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
    /// Data seed; repeat r initializes solvers with seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// L2,1 weight for cutcd-sc cells.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Nrv,
    Rmse,
    Prf1,
    Pd,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Training tensor.
    #[arg(long)]
    pub tensor: PathBuf,
    /// Side matrix; adds the objective to the report.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    /// Held-out entries in tensor format.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Defaults to nrv and pd, plus rmse and prf1 when --test is given.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value = "w", value_parser = parse_factor)]
    pub pd_factor: Factor,
    /// JSON-lines report; defaults to eval.jsonl in the model directory.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize, usize), String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match parts[..] {
        [j, k, l, m] => Ok((j, k, l, m)),
        _ => Err(format!("expected J,K,L,M, got {} values", parts.len())),
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: cutcd::Error| e.to_string())
}

fn parse_cutoff(s: &str) -> Result<CutoffRule, String> {
    s.parse().map_err(|e: cutcd::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<ValueMode, String> {
    s.parse().map_err(|e: cutcd::Error| e.to_string())
}

fn parse_factor(s: &str) -> Result<Factor, String> {
    s.parse().map_err(|e: cutcd::Error| e.to_string())
}
