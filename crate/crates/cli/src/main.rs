//! `gfmm`: train, apply, prune and benchmark GFMM hyperbox classifiers.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand};
use gfmm::pruning::NeverWinnerPolicy;
use gfmm::{Algorithm, SimilarityMeasure, TrainConfig};

#[derive(Parser)]
#[command(name = "gfmm", version, about = "General fuzzy min-max hyperbox classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV file.
    Train(TrainArgs),
    /// Classify the rows of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Remove low-accuracy hyperboxes using a validation set.
    Prune(PruneArgs),
    /// Outer k-fold evaluation with grid search on the training folds.
    Benchmark(BenchmarkArgs),
    /// Retrain on shuffled presentation orders and report the spread.
    OrderStudy(OrderStudyArgs),
    /// Friedman and Holm tests over a classifier-by-dataset table.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// CSV file; the label is the last column unless --label-column is given.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Args, Clone)]
pub struct CsvArgs {
    /// Zero-based label column.
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Treat the first row as data even if it looks like a header.
    #[arg(long, conflicts_with = "header")]
    pub no_header: bool,
    /// Treat the first row as a header.
    #[arg(long)]
    pub header: bool,
    /// Feature columns hold lower bounds then upper bounds.
    #[arg(long)]
    pub interval: bool,
    /// Keep only these feature columns (comma-separated indices or names).
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
}

#[derive(Args, Clone)]
pub struct HyperArgs {
    #[arg(long)]
    pub algo: Algorithm,
    /// Maximum hyperbox size.
    #[arg(long, default_value_t = 0.26)]
    pub theta: f64,
    /// Smallest size reached by online-adaptive.
    #[arg(long)]
    pub theta_min: Option<f64>,
    /// Size decay per pass for online-adaptive.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Pass limit for online-adaptive.
    #[arg(long)]
    pub max_passes: Option<usize>,
    /// Minimum similarity for agglomerative merges.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Similarity measure for agglomerative merges.
    #[arg(long)]
    pub measure: Option<SimilarityMeasure>,
    /// Sensitivity of the membership function, applied to every feature.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

impl HyperArgs {
    /// Combine the flags into a config, rejecting flags the algorithm ignores.
    pub fn config(&self) -> Result<TrainConfig, String> {
        let mut cfg = TrainConfig::new(self.algo, self.theta);
        if !self.algo.is_agglomerative()
            && (self.sigma.is_some() || self.measure.is_some()) {
                return Err(format!("--sigma and --measure only apply to agglomerative algorithms, not {}", self.algo));
            }
        if self.algo != Algorithm::OnlineAdaptive
            && (self.theta_min.is_some() || self.phi.is_some() || self.max_passes.is_some())
        {
            return Err(format!("--theta-min, --phi and --max-passes only apply to online-adaptive, not {}", self.algo));
        }
        cfg.theta_min = self.theta_min.unwrap_or(cfg.theta_min);
        cfg.phi = self.phi.unwrap_or(cfg.phi);
        cfg.max_passes = self.max_passes.unwrap_or(cfg.max_passes);
        cfg.sigma = self.sigma.unwrap_or(cfg.sigma);
        cfg.measure = self.measure.unwrap_or(cfg.measure);
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
pub struct ReportArgs {
    /// Write a JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run the computation twice and fail if the reports differ.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Shuffle the presentation order with this seed (default: file order).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to save the model.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Write predictions as CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled validation CSV.
    #[arg(long)]
    pub validation: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    /// Boxes winning with accuracy below this are removed.
    #[arg(long, default_value_t = 0.5)]
    pub min_accuracy: f64,
    /// What to do with boxes that never win: auto, keep or remove.
    #[arg(long, default_value = "auto", value_parser = parse_policy)]
    pub never_winners: NeverWinnerPolicy,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// TOML grid with `thetas`, `sigmas` and `measures` lists.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub theta_min: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    /// Write per-fold training and tuning times here.
    #[arg(long)]
    pub timings: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args)]
pub struct OrderStudyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 10)]
    pub shuffles: usize,
    /// Folds used to hold out the test split.
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// Which fold is the test split.
    #[arg(long, default_value_t = 0)]
    pub test_fold: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Friedman chi-squared and Iman-Davenport F test.
    Friedman(StatsArgs),
    /// Holm step-down comparison against a control classifier.
    Holm(HolmArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("table").required(true).args(["errors", "ranks"])))]
pub struct StatsArgs {
    /// Dataset-by-classifier error table; lower is better.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Dataset-by-classifier rank table.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Round average ranks to this many decimals before testing, or `none`.
    #[arg(long, default_value = "4", value_parser = parse_decimals)]
    pub rank_decimals: Decimals,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Args)]
pub struct HolmArgs {
    #[command(flatten)]
    pub table: StatsArgs,
    /// Column name of the control classifier.
    #[arg(long)]
    pub control: String,
}

#[derive(Clone, Copy)]
pub struct Decimals(pub Option<u32>);

fn parse_decimals(s: &str) -> Result<Decimals, String> {
    if s == "none" {
        return Ok(Decimals(None));
    }
    s.parse().map(|d| Decimals(Some(d))).map_err(|_| format!("expected a number or `none`, got {s:?}"))
}

fn parse_policy(s: &str) -> Result<NeverWinnerPolicy, String> {
    match s {
        "auto" => Ok(NeverWinnerPolicy::Auto),
        "keep" => Ok(NeverWinnerPolicy::Keep),
        "remove" => Ok(NeverWinnerPolicy::Remove),
        _ => Err(format!("expected auto, keep or remove, got {s:?}")),
    }
}

/// Errors the user can fix by changing flags.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GFMM_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow::anyhow!("GFMM_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Prune(a) => commands::prune(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::OrderStudy(a) => commands::order_study(a),
        Command::Stats(StatsCommand::Friedman(a)) => commands::friedman(a),
        Command::Stats(StatsCommand::Holm(a)) => commands::holm(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<UsageError>() {
            Some(u) => Cli::command().error(clap::error::ErrorKind::ArgumentConflict, &u.0).exit(),
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
