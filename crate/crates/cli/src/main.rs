//! `sbm`: generate block-model graphs, compute recovery thresholds and run detectors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sbm", version, about = "Community detection in the general stochastic block model")]
struct Cli {
    /// Maximum worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a graph and its planted labels.
    Gen(GenArgs),
    /// Split the edges of a graph into two graphs at random.
    Split(SplitArgs),
    /// Pairwise CH-divergences between community profiles.
    Divergence(DivergenceArgs),
    /// The finest partition recoverable exactly.
    FinestPartition(ParamsArgs),
    /// Eigenvalues of PQ and the partial-recovery conditions.
    Spectral(ParamsArgs),
    /// Partial recovery by sphere comparison.
    DetectPartial(DetectPartialArgs),
    /// Exact recovery by degree profiling.
    DetectExact(DetectExactArgs),
    /// Exact Poisson overlap between two community profiles.
    Oracle(OracleArgs),
    /// Run a parameter sweep described by a TOML file.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    /// Model parameters (TOML).
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Model parameters (TOML).
    #[arg(long)]
    pub params: PathBuf,
    /// Number of vertices.
    #[arg(long)]
    pub n: usize,
    /// Random seed [default: the params file's seed, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Edge-list output.
    #[arg(long)]
    pub out: PathBuf,
    /// Planted-label output.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Input edge list.
    #[arg(long)]
    pub graph: PathBuf,
    /// Probability that an edge goes to the selected side.
    #[arg(long)]
    pub prob: f64,
    /// Random seed [default: the params file's seed, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output for the selected edges.
    #[arg(long)]
    pub selected_out: PathBuf,
    /// Output for the remaining edges.
    #[arg(long)]
    pub remainder_out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub common: ParamsArgs,
    /// Allow zero kernel entries (0^s = 0).
    #[arg(long)]
    pub extended: bool,
}

/// Overrides for the sphere-comparison defaults.
#[derive(Args, Debug, Default)]
pub struct SphereFlags {
    /// Held-out edge probability.
    #[arg(long)]
    pub c: Option<f64>,
    /// Number of anchor vertices.
    #[arg(long)]
    pub m: Option<usize>,
    /// Depth split parameter.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comparison slack.
    #[arg(long)]
    pub x: Option<f64>,
    /// Number of unreliable runs.
    #[arg(long = "runs", visible_alias = "T")]
    pub runs: Option<usize>,
    /// Sphere depth r.
    #[arg(long)]
    pub r: Option<usize>,
    /// Sphere depth r'.
    #[arg(long)]
    pub r_prime: Option<usize>,
    /// Maximum vertices reached by one search.
    #[arg(long)]
    pub budget: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DetectPartialArgs {
    /// Input edge list.
    #[arg(long)]
    pub graph: PathBuf,
    /// Model parameters (TOML).
    #[arg(long)]
    pub params: PathBuf,
    /// Ground-truth labels; enables the accuracy line of the report.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Random seed [default: the params file's seed, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output labels.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sphere: SphereFlags,
}

#[derive(Args, Debug)]
pub struct DetectExactArgs {
    /// Input edge list.
    #[arg(long)]
    pub graph: PathBuf,
    /// Model parameters (TOML).
    #[arg(long)]
    pub params: PathBuf,
    /// Ground-truth labels; enables accuracy and the exact-match verdict.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Random seed [default: the params file's seed, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output group assignment per vertex.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of edges used for the preliminary labeling.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Overrides for the preliminary sphere-comparison stage.
    #[command(flatten)]
    pub sphere: SphereFlags,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Take profiles and priors of two communities from a parameter file.
    #[arg(long, conflicts_with_all = ["theta1", "theta2"])]
    pub params: Option<PathBuf>,
    /// Communities compared when reading a parameter file.
    #[arg(long, num_args = 2, value_delimiter = ',', default_values_t = [0, 1])]
    pub pair: Vec<usize>,
    /// First profile, comma separated.
    #[arg(long, value_delimiter = ',', requires = "theta2")]
    pub theta1: Vec<f64>,
    /// Second profile, comma separated.
    #[arg(long, value_delimiter = ',', requires = "theta1")]
    pub theta2: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub p1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p2: f64,
    /// Values of ln n, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 6.0, 7.0, 8.0, 9.0])]
    pub ln_n: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Sweep description (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// CSV output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Split(a) => commands::split(&a),
        Command::Divergence(a) => commands::divergence(&a),
        Command::FinestPartition(a) => commands::finest_partition(&a),
        Command::Spectral(a) => commands::spectral(&a),
        Command::DetectPartial(a) => commands::detect_partial(&a),
        Command::DetectExact(a) => commands::detect_exact(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(1)
        }
    }
}
