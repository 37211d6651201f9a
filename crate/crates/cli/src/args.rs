use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Contrastive feature selection: pick the target-dataset features whose
/// variation is absent from a background dataset.
#[derive(Parser, Debug)]
#[command(name = "cfs", version, args_override_self = true)]
pub struct Cli {
    /// key=value file of flag defaults; explicit flags win (default: none)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log progress to stderr, repeat for more detail (default: warnings only)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a dataset (target.csv, background.csv, labels.csv, manifest.txt)
    Gen(GenArgs),
    /// Train a selector and write its checkpoint, features and loss curve
    Train(TrainCmd),
    /// Extract a feature set from a trained checkpoint
    Select(SelectCmd),
    /// Benchmark methods × k × seeds with a downstream classifier
    Eval(EvalCmd),
    /// Check the mutual-information bounds on random discrete distributions
    VerifyTheory(TheoryCmd),
    /// Render a feature set as a binary PGM mask
    Mask(MaskCmd),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GenArgs {
    /// Regenerate from a manifest written by an earlier `gen` (default: none)
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub kind: Option<GenKind>,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Digits on grass-like textures
    Grassy(GrassyCmd),
    /// Tabular data with planted salient features
    Planted(PlantedCmd),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GrassyCmd {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Texture amplitude as a multiple of the digit amplitude
    #[arg(long, default_value = "2.0")]
    pub scale: f64,
    /// Image side in pixels
    #[arg(long, default_value_t = 28)]
    pub side: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_target: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_background: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of png/jpeg grass photos; procedural textures when absent (default: none)
    #[arg(long)]
    pub textures: Option<PathBuf>,
    /// IDX image file of digits; procedural digits when absent (default: none)
    #[arg(long, requires = "mnist_labels")]
    pub mnist_images: Option<PathBuf>,
    /// IDX label file matching --mnist-images (default: none)
    #[arg(long, requires = "mnist_images")]
    pub mnist_labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct PlantedCmd {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Target rows
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Background rows
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub k_salient: usize,
    #[arg(long, default_value_t = 10)]
    pub l_background: usize,
    #[arg(long, default_value = "1.0")]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    None,
    /// Column min-max over target and background together
    Minmax,
    /// Median library-size scaling then ln(1 + x), per row
    Log1p,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory holding target.csv, background.csv and labels.csv (default: none)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target CSV, overrides --data (default: none)
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Background CSV, overrides --data (default: none)
    #[arg(long)]
    pub background: Option<PathBuf>,
    /// Label CSV for the target rows, overrides --data (default: none)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Column of the target CSV holding class labels (default: none)
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, value_enum, default_value_t = Normalize::None)]
    pub normalize: Normalize,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Number of features to select
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Background representation width l
    #[arg(long, default_value_t = 20)]
    pub bg_dim: usize,
    /// Gate penalty weight, or "auto" to search for k open gates
    #[arg(long, default_value = "0.1")]
    pub lambda: String,
    /// Lower end of the automatic λ search bracket
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_lo: f64,
    /// Upper end of the automatic λ search bracket
    #[arg(long, default_value_t = 10.0)]
    pub lambda_hi: f64,
    /// Gate noise scale σ
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// Epochs of gate training (and of the stg-supervised classifier)
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Epochs of background autoencoder pretraining
    #[arg(long, default_value_t = 100)]
    pub pretrain_epochs: usize,
    /// Temperature annealing epochs of the concrete autoencoder
    #[arg(long, default_value_t = 200)]
    pub cae_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Hidden widths of the reconstructor, CAE decoder
    #[arg(long, value_delimiter = ',', default_value = "512,512")]
    pub hidden: Vec<usize>,
    /// Hidden widths of the background encoder and decoder
    #[arg(long, value_delimiter = ',', default_value = "128")]
    pub ae_hidden: Vec<usize>,
    /// Hidden widths of the stg-supervised classifier
    #[arg(long, value_delimiter = ',', default_value = "512,512")]
    pub clf_hidden: Vec<usize>,
    /// Initial concrete temperature
    #[arg(long, default_value_t = 10.0)]
    pub start_temp: f64,
    /// Final concrete temperature
    #[arg(long, default_value_t = 0.1)]
    pub end_temp: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Pretrained,
    Joint,
    Stopgrad,
    Cae,
    StgSupervised,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Pretrained)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Train twice and fail with exit code 3 unless both feature sets match (default: off)
    #[arg(long, default_value_t = false)]
    pub check_determinism: bool,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SelectCmd {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Features to keep (gate models); concrete models use their own k
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Output feature JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Knn,
    Logistic,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EvalCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Methods to compare
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "pretrained,stopgrad,cae,stg-supervised"
    )]
    pub methods: Vec<ModeArg>,
    /// Feature counts
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Knn)]
    pub classifier: ClassifierArg,
    /// Training fraction of the target rows
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Side of square image features, enabling masks and the central-window
    /// fraction; 0 for non-image data
    #[arg(long, default_value_t = 0)]
    pub image_side: usize,
    /// Parallel training runs
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Fill the seconds column of results.csv, which makes reruns differ (default: off)
    #[arg(long, default_value_t = false)]
    pub timing: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Run the benchmark twice and fail with exit code 3 unless the CSVs match (default: off)
    #[arg(long, default_value_t = false)]
    pub check_determinism: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum InstanceArg {
    /// Alternate between the two kinds below
    Mixed,
    Dirichlet,
    NearAssumption,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TheoryCmd {
    #[arg(long, default_value_t = 10000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InstanceArg::Mixed)]
    pub kind: InstanceArg,
    /// Largest latent alphabet |S|, |Z|
    #[arg(long, default_value_t = 3)]
    pub max_latent: usize,
    /// Largest observation alphabet |X|
    #[arg(long, default_value_t = 9)]
    pub max_x: usize,
    /// Random (va, vn) pairs for the Gaussian MSE/MI check; 0 to skip
    #[arg(long, default_value_t = 1000)]
    pub gaussian_pairs: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct MaskCmd {
    /// Feature JSON
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 28)]
    pub width: usize,
    #[arg(long, default_value_t = 28)]
    pub height: usize,
    /// Output PGM file
    #[arg(long)]
    pub out: PathBuf,
}
