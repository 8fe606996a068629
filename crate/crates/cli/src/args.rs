use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowhunter::classifiers::ClassifierKind;

/// Flow-based botnet detection: extract flows, train and tune classifiers,
/// and run the detection engine.
#[derive(Debug, Parser)]
#[command(name = "flowhunter", version, propagate_version = true)]
pub struct Cli {
    /// TOML configuration file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Maximum worker threads for any stage.
    #[arg(long, short = 'j', global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Seed for every random choice (fold plans, bootstraps, GA).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// More log output; repeat for debug.
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a pcap file into a bidirectional flow file.
    Extract(ExtractArgs),
    /// Fit a classifier and register it for detection.
    Train(TrainArgs),
    /// Stratified k-fold evaluation of a classifier.
    Crossval(CrossvalArgs),
    /// Rank features by random forest importance and keep the top k.
    Select(SelectArgs),
    /// Hyperparameter search: genetic algorithm, grid or random.
    Optimize(OptimizeArgs),
    /// Classify flows from a file or a live interface and raise alerts.
    Detect(DetectArgs),
    /// Render stored evaluation reports and search histories as tables.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct AggregatorArgs {
    /// Seconds without packets before a flow is closed.
    #[arg(long, value_name = "SECS")]
    pub idle_timeout: Option<f64>,
    /// Seconds after which a long flow is split.
    #[arg(long, value_name = "SECS")]
    pub active_timeout: Option<f64>,
    /// Seconds between flow status checks.
    #[arg(long, value_name = "SECS")]
    pub status_interval: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Input capture (classic pcap).
    pub pcap: PathBuf,
    /// Output flow file.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: PathBuf,
    /// Label flows touching any listed address Botnet, the rest Normal.
    #[arg(long, value_name = "FILE")]
    pub infected_ips: Option<PathBuf>,
    #[command(flatten)]
    pub aggregator: AggregatorArgs,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Labeled flow file; repeat to concatenate several.
    #[arg(long = "input", short = 'f', value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Feature columns: a comma list, or @FILE with one name per line.
    /// Defaults to every numeric flow field.
    #[arg(long, value_name = "LIST")]
    pub features: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Classifier: GaussianNB, DecisionTree, RandomForest, AdaBoost, LinearSVM or KNN.
    #[arg(long, short = 'c', value_name = "KIND")]
    pub classifier: Option<ClassifierKind>,
    /// Hyperparameter override, e.g. `n_estimators=200`; repeatable.
    #[arg(long = "param", short = 'p', value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// JSON classifier spec, or a result file written by `optimize`.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory the model file is written to.
    #[arg(long, value_name = "DIR")]
    pub models_dir: Option<PathBuf>,
    /// Metadata document to register the model in [default: <models-dir>/models.json].
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
    /// Model identifier [default: the classifier name].
    #[arg(long, value_name = "ID")]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of folds [default: 10].
    #[arg(long, short = 'k', value_name = "K")]
    pub folds: Option<usize>,
    /// Write the report as JSON, for `report`.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write tab-separated per-fold rows.
    #[arg(long, value_name = "FILE")]
    pub rows: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Labeled flow file; each is ranked separately and the rankings averaged.
    #[arg(long = "input", short = 'f', value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Candidate features, as for the other commands.
    #[arg(long, value_name = "LIST")]
    pub features: Option<String>,
    /// Features to keep [default: 15].
    #[arg(long, short = 'k', value_name = "K")]
    pub top_k: Option<usize>,
    /// Random forest override used for ranking, e.g. `n_estimators=50`.
    #[arg(long = "param", short = 'p', value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Write the kept feature names, one per line (usable as @FILE).
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ga,
    Grid,
    Random,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Classifier whose hyperparameters are searched.
    #[arg(long, short = 'c', value_name = "KIND")]
    pub classifier: ClassifierKind,
    #[arg(long, value_enum, default_value_t = Method::Ga)]
    pub method: Method,
    /// GA population size [default: 10].
    #[arg(long, value_name = "N")]
    pub population: Option<usize>,
    /// GA generation limit [default: 10].
    #[arg(long, value_name = "N")]
    pub generations: Option<usize>,
    /// Folds of the cross-validated fitness [default: 10].
    #[arg(long, short = 'k', value_name = "K")]
    pub folds: Option<usize>,
    /// Random search draws [default: 100].
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// TOML grid, `gene = [values...]`; defaults to the built-in grid for
    /// DecisionTree and RandomForest.
    #[arg(long, value_name = "FILE")]
    pub grid: Option<PathBuf>,
    /// Refuse grids with more combinations than this [default: 10000].
    #[arg(long, value_name = "N")]
    pub grid_cap: Option<u128>,
    /// Write the best chromosome, its fitness and spec as JSON.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write the per-generation (GA) or per-candidate (grid, random) history.
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Read a flow file or pcap (detected by content).
    #[arg(short = 'r', value_name = "PATH", conflicts_with = "interface", required_unless_present = "interface")]
    pub read: Option<PathBuf>,
    /// Capture live from an interface.
    #[arg(short = 'i', value_name = "IFACE")]
    pub interface: Option<String>,
    /// Directory holding model files.
    #[arg(long, value_name = "DIR")]
    pub models_dir: Option<PathBuf>,
    /// Model metadata document [default: <models-dir>/models.json].
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,
    /// Append alerts to this file.
    #[arg(long, value_name = "FILE")]
    pub alert_log: Option<PathBuf>,
    /// Append every classified flow to this file.
    #[arg(long, value_name = "FILE")]
    pub flow_log: Option<PathBuf>,
    /// Serve flows and alerts to websocket clients on this address.
    #[arg(long, value_name = "ADDR:PORT")]
    pub listen: Option<String>,
    #[command(flatten)]
    pub aggregator: AggregatorArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reports from `crossval -o`, or histories from `optimize --history`.
    #[arg(required = true, value_name = "FILE")]
    pub files: Vec<PathBuf>,
    /// Include per-fold rows for evaluation reports.
    #[arg(long)]
    pub folds: bool,
    /// Rows shown for grid and random search tables.
    #[arg(long, default_value_t = 10, value_name = "N")]
    pub top: usize,
}
