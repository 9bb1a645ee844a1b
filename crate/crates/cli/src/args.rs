use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "gausspert",
    version,
    about = "Schrödinger perturbations of Gaussian kernels",
    allow_negative_numbers = true
)]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, env = "GAUSSPERT_SEED")]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// TOML file with run settings (seed, format, threads, quad, grid).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal 4G constants, tightness witness and optimality margin.
    Fourg(FourgArgs),
    /// Gaussian kernel values, Chapman–Kolmogorov and the 3G ratio.
    Kernel(KernelArgs),
    /// Heat potential, Kato functional and the Kato upper bound.
    Kato(KatoArgs),
    /// Perturbation series at one space-time pair.
    Series(SeriesArgs),
    /// Explicit Gaussian upper bound from a Kato norm.
    Bound(BoundArgs),
    /// Splitting of a superadditive function into small pieces.
    Split(SplitArgs),
    /// Sampled check that a potential belongs to a class N.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fourg(_) => "fourg",
            Command::Kernel(_) => "kernel",
            Command::Kato(_) => "kato",
            Command::Series(_) => "series",
            Command::Bound(_) => "bound",
            Command::Split(_) => "split",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FourgArgs {
    /// Reduced parameter `a/(b−a)`; alternative to `--a/--b/--d`.
    #[arg(long, conflicts_with_all = ["a", "b", "d"])]
    pub alpha: Option<f64>,
    #[arg(long, requires_all = ["b", "d"])]
    pub a: Option<f64>,
    #[arg(long, requires_all = ["a", "d"])]
    pub b: Option<f64>,
    #[arg(long, requires_all = ["a", "b"])]
    pub d: Option<usize>,
    /// Starts of the reduced-gap maximiser.
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    /// Random space-time configurations to test with `M` (needs `--a/--b/--d`).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Comma-separated start point (default origin).
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<f64>,
    /// Comma-separated end point (default origin).
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    /// Intermediate time of the Chapman–Kolmogorov check (default midpoint).
    #[arg(long)]
    pub u: Option<f64>,
    /// Add the 3G ratio for this pair and the radius where it reaches `--level`.
    #[arg(long)]
    pub three_g: bool,
    #[arg(long, default_value_t = 1e6)]
    pub level: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct KatoArgs {
    /// Compare the heat potential of `g_c` at `x` with its closed form.
    #[arg(long)]
    pub heat_potential: bool,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Comma-separated point; defaults to `(0,…,0,r)`.
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Potential: `zero`, `constant:Q0`, `gaussian:COEF,WIDTH`, `indicator:NMAX` or JSON.
    #[arg(long)]
    pub potential: Option<String>,
    /// Radius of the Kato functional.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Time horizon of the Kato upper bound.
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    GridRecursion,
    MonteCarlo,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long, default_value = "zero")]
    pub potential: String,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub y: Vec<f64>,
    #[arg(long, value_enum, default_value = "grid-recursion")]
    pub engine: EngineChoice,
    #[arg(long, default_value_t = 200)]
    pub n_terms: usize,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 128)]
    pub steps: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    /// Prefactor `Λ` in `p ≤ Λ e^{λ(t−s)} g_b`.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_cap: f64,
    /// Growth rate `λ`.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.9)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Kato norm `I_{√h}(q)`; computed from `--potential` when absent.
    #[arg(long)]
    pub i: Option<f64>,
    #[arg(long)]
    pub potential: Option<String>,
    /// `t − s` at which `ε` is optimised.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Tabulate series against bound at sampled points (needs `--potential`).
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// `linear:BETA`, `atoms:LOC@MASS;…` or JSON.
    #[arg(long)]
    pub q: String,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long)]
    pub theta: f64,
    /// Count atoms on `[s,t)` instead of `(s,t)` for `atoms:…`.
    #[arg(long)]
    pub half_open: bool,
    /// Split the regularisation `Q⁻` instead of `Q`.
    #[arg(long)]
    pub regularize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.9)]
    pub a: f64,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub potential: String,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Superadditive `Q` (syntax as for `split`).
    #[arg(long)]
    pub big_q: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Check the `Λ`-rescaled membership `(η/Λ, Q/Λ)` instead.
    #[arg(long)]
    pub lambda_cap: Option<f64>,
}
