use std::path::PathBuf;

use chembridge::TrainConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "chembridge",
    version,
    about = "Align molecules with mechanism-of-action text"
)]
pub struct Cli {
    /// Worker threads for per-molecule stages; 1 forces the sequential path.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a drug/target CSV and add the text_rich column.
    Prepare(PrepareArgs),
    /// ECFP bit vectors for every record, as EMB1.
    Fingerprint(FingerprintArgs),
    /// Feature-hashed text vectors for every record, as EMB1.
    EmbedText(EmbedTextArgs),
    /// Train/test partition by scaffold or at random.
    Split(SplitArgs),
    /// Fit the projection heads.
    Train(TrainArgs),
    /// Retrieval metrics on one partition.
    Eval(EvalArgs),
    /// Grid over temperature, margin and drug-name inclusion.
    Ablate(AblateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Fingerprint(_) => "fingerprint",
            Command::EmbedText(_) => "embed-text",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = chembridge::data_ingest::DEFAULT_MIN_TEXT_LEN)]
    pub min_text_len: usize,
    /// Append the drug name to text_rich.
    #[arg(long)]
    pub with_drug_name: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FingerprintArgs {
    /// Prepared CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = chembridge::fingerprint::DEFAULT_RADIUS)]
    pub radius: u32,
    #[arg(long, default_value_t = chembridge::fingerprint::DEFAULT_NBITS)]
    pub nbits: usize,
    /// Fingerprint every component instead of only the largest (salts, counter-ions).
    #[arg(long)]
    pub keep_all_components: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    TextRich,
    Mechanism,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedTextArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = TextField::TextRich)]
    pub field: TextField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Scaffold,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitMode::Scaffold)]
    pub mode: SplitMode,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long, env = "CHEMBRIDGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

/// Inputs shared by train, eval and ablate.
#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Prepared CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Molecule embeddings (EMB1 or TSV) keyed by row id.
    #[arg(long)]
    pub mol: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.07)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub batch_size: usize,
    /// Denominator weight of same-target negatives.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.15)]
    pub margin: f64,
    #[arg(long, default_value_t = 1.0)]
    pub margin_weight: f64,
    #[arg(long, env = "CHEMBRIDGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl TrainFlags {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            temperature: self.temperature,
            lr: self.lr,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            hard_negative_beta: self.beta,
            margin: self.margin,
            margin_weight: self.margin_weight,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: DataArgs,
    /// Text embeddings keyed by row id.
    #[arg(long)]
    pub text: PathBuf,
    /// Checkpoint path (BRG1).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch losses; defaults to history.csv next to the checkpoint.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub inputs: DataArgs,
    #[arg(long)]
    pub text: PathBuf,
    /// Report path (JSON); cmc.csv and sim.csv are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Partition::Test)]
    pub partition: Partition,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Bootstrap replicates; 0 skips the intervals.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Size of the exported similarity block; 0 skips it.
    #[arg(long, default_value_t = 40)]
    pub export_sim: usize,
    #[arg(long, env = "CHEMBRIDGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    pub inputs: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.07")]
    pub temps: Vec<f64>,
    /// A margin of 0 turns the margin term off.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.15")]
    pub margins: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "on,off")]
    pub drugname: Vec<Toggle>,
    /// Precomputed text embeddings with the drug name; hashed from text otherwise.
    #[arg(long)]
    pub text_with_name: Option<PathBuf>,
    #[arg(long)]
    pub text_without_name: Option<PathBuf>,
    /// Dimension of hashed text vectors.
    #[arg(long, default_value_t = 1024)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    On,
    Off,
}
