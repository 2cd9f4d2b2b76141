use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsad::{FeatureMode, LayerSelection};
use serde::{Serialize, Serializer};

/// Records a selection in the same syntax the flag accepts.
fn as_flag<S: Serializer>(layers: &LayerSelection, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(layers)
}

#[derive(Debug, Parser)]
#[command(name = "hsad", version, about = "Spectral hallucination detection over hidden-state traces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace file with a known spectral anomaly.
    Synth(SynthArgs),
    /// Turn a trace file into per-dimension spectral features.
    Featurize(FeaturizeArgs),
    /// Split a feature file into train and test files.
    Split(SplitArgs),
    /// Train a detector on a labeled feature file.
    Train(TrainArgs),
    /// Score a detector on a labeled test feature file.
    Eval(EvalArgs),
    /// Run an ablation suite end to end from a trace file.
    Ablate(AblateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    /// Inject the anomaly into dimensions 0..N.
    #[arg(long, default_value_t = 8, conflicts_with = "anomaly_dim_list")]
    pub anomaly_dims: usize,
    /// Explicit comma-separated anomaly dimensions.
    #[arg(long, value_delimiter = ',')]
    pub anomaly_dim_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    pub anomaly_bin: usize,
    #[arg(long, default_value_t = 10.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pos_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add a constant drawn from U[-R, R] to every column of every record.
    #[arg(long, default_value_t = 0.0)]
    pub offset_range: f64,
    /// Observation points to generate, comma-separated, or `all`.
    #[arg(long, default_value = "A_end")]
    pub obs_points: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    FftMax,
    TimeMax,
    TimeMaxAbs,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FftMax => FeatureMode::FftMax,
            ModeArg::TimeMax => FeatureMode::TimeMax,
            ModeArg::TimeMaxAbs => FeatureMode::TimeMaxAbs,
        }
    }
}

/// Selection and labeling flags shared by `featurize` and `ablate`.
#[derive(Clone, Debug, Args, Serialize)]
pub struct SelectArgs {
    /// Node subset, e.g. `ah,h`, or `all`.
    #[arg(long, default_value = "all")]
    pub nodes: String,
    /// `all`, a list such as `2,5,9`, or `random:K[:seed=S]`.
    #[arg(long, default_value = "all")]
    #[serde(serialize_with = "as_flag")]
    pub layers: LayerSelection,
    /// Keep records captured at this point; `any` keeps every record.
    #[arg(long, default_value = "A_end")]
    pub obs_point: String,
    /// Relabel records from similarity scores: hallucination iff sim <= tau.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::FftMax)]
    pub mode: ModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub select: SelectArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

/// Detector hyperparameters; the seed is supplied by each command.
#[derive(Clone, Debug, Args, Serialize)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub l1_lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Hidden widths, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1024,512,256")]
    pub hidden: Vec<usize>,
    /// Allow a last hidden width other than 256.
    #[arg(long)]
    pub allow_any_width: bool,
}

impl HyperArgs {
    pub fn config(&self, seed: u64) -> hsad::TrainConfig {
        hsad::TrainConfig {
            epochs: self.epochs,
            initial_lr: self.lr,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            l1_lambda: self.l1_lambda,
            dropout_rate: self.dropout,
            seed,
            hidden_sizes: self.hidden.clone(),
            allow_any_width: self.allow_any_width,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    TimeVsFreq,
    Layers,
    Nodes,
    ObsPoints,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub traces: PathBuf,
    /// JSON table with one row per condition.
    #[arg(long)]
    pub out: PathBuf,
    /// Feature mode for suites that do not vary it.
    #[arg(long, value_enum, default_value_t = ModeArg::FftMax)]
    pub mode: ModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub select: SelectArgs,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    /// Base seed; condition i uses seed + i for its split and training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
}
