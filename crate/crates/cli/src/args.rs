use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use har_core::classifiers::ModelKind;
use har_core::features::Taper;
use har_core::prompting::{PairMode, DEFAULT_PRECISION, DEFAULT_TOKEN_LIMIT};
use har_core::DatasetId;

#[derive(Debug, Parser)]
#[command(
    name = "har",
    version,
    about = "Inertial-sensor activity recognition: ingest, features, baselines, prompts and evaluation",
    propagate_version = true
)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a dataset distribution into the canonical CSV.
    Ingest(IngestArgs),
    /// Cut canonical records into sliding windows (JSONL).
    Segment(SegmentArgs),
    /// Compute per-channel statistics for every window.
    Features(FeaturesArgs),
    /// Train a baseline classifier on the training side of a split.
    Train(TrainArgs),
    /// Evaluate a model file or language-model config on the test side of a split.
    Eval(EvalArgs),
    /// Build an instruction-tuning corpus from feature rows.
    Promptgen(PromptgenArgs),
    /// Compare raw and feature prompt sizes for every window.
    Tokenbudget(TokenbudgetArgs),
    /// Classify feature rows with a chat-completion backend.
    LlmClassify(LlmClassifyArgs),
    /// Ask a free-form question about feature rows.
    Qa(QaArgs),
    /// Correlation, PCA and histogram tables.
    Analyze(AnalyzeArgs),
    /// Merge metric reports into one table.
    Report(ReportArgs),
    /// Run a declarative multi-stage pipeline with incremental rebuilds.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dataset: DatasetId,
    /// Root directory of the distribution.
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object mapping raw labels to canonical ones; replaces the built-in map.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Fail on labels missing from the map instead of dropping their rows.
    #[arg(long)]
    pub strict_labels: bool,
    /// Body position block (Shoaib); default `arm`.
    #[arg(long)]
    pub position: Option<String>,
    /// Device family (`phone` or `watch`) for HHAR and WISDM.
    #[arg(long)]
    pub device: Option<String>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Canonical CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub window: usize,
    #[arg(long, default_value_t = 20)]
    pub step: usize,
    /// A time gap above this multiple of the median sample spacing starts a new session.
    #[arg(long, default_value_t = 5.0)]
    pub gap_factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaperArg {
    Rectangular,
    Hann,
}

impl From<TaperArg> for Taper {
    fn from(t: TaperArg) -> Self {
        match t {
            TaperArg::Rectangular => Taper::Rectangular,
            TaperArg::Hann => Taper::Hann,
        }
    }
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Windows JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub band_split_hz: f64,
    #[arg(long, value_enum, default_value_t = TaperArg::Rectangular)]
    pub taper: TaperArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Feature CSVs; several are pooled over their shared columns.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// `seen[:fraction]`, `unseen[:s1,s2,..]` or `cross:<train>:<test>`.
    #[arg(long)]
    pub split: String,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Md,
    /// Models × (dataset, split) accuracy grid.
    Pivot,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model JSON from `train`, or a TOML language-model config.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct PromptgenArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Template file, or a bundled name (`classify`, `reasoned`, `qa`).
    #[arg(long, default_value = "classify")]
    pub template: String,
    #[arg(long, default_value = "classify")]
    pub mode: PairMode,
    /// Comma-separated label set; defaults to the labels in the feature file.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TokenbudgetArgs {
    #[arg(long)]
    pub windows: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOKEN_LIMIT)]
    pub limit: usize,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: usize,
    #[arg(long, default_value_t = 3.0)]
    pub band_split_hz: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Http,
    Mock,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// TOML backend config; flags below override its fields.
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Chat-completions URL for the http backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the server.
    #[arg(long = "model")]
    pub model_name: Option<String>,
    /// Name of the environment variable holding the API key; empty disables auth.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub timeout_s: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub requests_per_second: Option<f64>,
    /// Labeled feature CSV the mock backend fits its centroids on.
    #[arg(long)]
    pub mock_features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LlmClassifyArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub features: PathBuf,
    /// Comma-separated label set; defaults to the labels in the feature file.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long, default_value = "classify")]
    pub template: String,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: usize,
    /// Only the first N rows.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QaArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub question: String,
    #[arg(long, default_value = "qa")]
    pub template: String,
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    pub precision: usize,
    /// Only the first N rows.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    Corr,
    Pca,
    Hist,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalysisKind,
    /// Canonical CSV or feature CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to these columns (channel names like `gy`, or feature names).
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long)]
    pub activity: Option<String>,
    #[arg(long)]
    pub dataset: Option<DatasetId>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files from `eval`.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Md)]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pipeline TOML; relative paths inside resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Run every stage even if its fingerprint is current.
    #[arg(long)]
    pub force: bool,
    /// Print the stage plan and exit.
    #[arg(long)]
    pub dry_run: bool,
}
