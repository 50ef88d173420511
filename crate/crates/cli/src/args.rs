use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ptc",
    version,
    about = "Generate contextual LP datasets, run calibrated robust benchmarks, and tabulate reports",
    after_help = "Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error, 3 a method failed on every trial.\n\
                  PTC_SEED supplies the seed when neither --seed nor a config file sets one."
)]
pub struct Cli {
    /// Maximum worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dataset CSV (z_1..z_d, c_1..c_n) and its JSON sidecar.
    Gen(GenArgs),
    /// Run a benchmark and write the report CSV.
    Run(RunArgs),
    /// Print a report CSV as aligned VaR and coverage panels.
    Table(TableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Toy,
    ShortestPath,
    Knapsack,
}

impl From<ProblemArg> for ptc_core::problems::ProblemKind {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Toy => Self::Toy,
            ProblemArg::ShortestPath => Self::ShortestPath,
            ProblemArg::Knapsack => Self::Knapsack,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Problem family.
    #[arg(long, value_enum)]
    pub problem: ProblemArg,
    /// Number of samples.
    #[arg(long = "T", value_parser = clap::value_parser!(u64).range(1..))]
    pub t: u64,
    /// Covariate dimension (at least 3 for shortest-path and knapsack).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: u64,
    /// Knapsack item count.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Root seed (falls back to PTC_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; files are named <problem>.csv and <problem>.meta.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config whose keys mirror these flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem family.
    #[arg(long, value_enum)]
    pub problem: Option<ProblemArg>,
    /// Comma-separated methods: ptc-b, ptc-e, ellipsoid, knn, dro, individual, cvar.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Comma-separated coverage levels in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Samples per trial (split 60/20/20).
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Covariate dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Knapsack item count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Independent trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Test covariates per trial (default 500; 100 for knapsack).
    #[arg(long)]
    pub test_points: Option<usize>,
    /// Conditional cost draws per test covariate for VaR.
    #[arg(long)]
    pub var_samples: Option<usize>,
    /// Knapsack constraint sets per test covariate (1..=10).
    #[arg(long)]
    pub constraint_sets: Option<usize>,
    /// Root seed (falls back to the config file, then PTC_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Report CSV written by `ptc run`.
    pub report: PathBuf,
}
