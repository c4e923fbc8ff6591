use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "rocksr",
    version,
    about = "Super-resolution of grayscale micro-CT slices",
    after_help = "Environment: ROCKSR_THREADS sets the worker thread count (default 1, sequential and bit-reproducible)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an LR/HR dataset from a directory of HR slices.
    Prepare(PrepareArgs),
    /// Train a model and keep the best-validating epoch.
    Train(TrainArgs),
    /// Mean validation PSNR of a checkpoint, next to the bicubic baseline.
    Validate(ValidateArgs),
    /// Super-resolve an image or a directory of images.
    Sr(SrArgs),
    /// Per-image MSE/PSNR and per-method mean/variance.
    Metrics(MetricsArgs),
    /// Absolute difference map between two images.
    Diffmap(DiffmapArgs),
    /// Intensity histograms and valley-to-peak ratios.
    Hist(HistArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub hr_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// bicubic or unknown
    #[arg(long, default_value = "bicubic")]
    pub mode: String,
    /// Blur and noise the LR images.
    #[arg(long)]
    pub augment: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split for a flat source directory.
    #[arg(long, default_value = "train")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints and logs.
    #[arg(long)]
    pub out: PathBuf,
    /// key = value file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Resume from a training checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// sr-resnet, edsr, wdsr-a or wdsr-b
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub scale: Option<usize>,
    /// bicubic or unknown
    #[arg(long)]
    pub subset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Iterations per epoch.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr_crop: Option<usize>,
    #[arg(long)]
    pub lr_init: Option<f64>,
    /// Epochs per halving of the learning rate.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Blur/noise augmentation of LR crops.
    #[arg(long)]
    pub augment: bool,
    /// f32 or f64
    #[arg(long)]
    pub dtype: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "bicubic")]
    pub subset: String,
    #[arg(long, default_value = "valid")]
    pub split: String,
    /// Per-image scores CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Image file or directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Image file, or directory when the input is one.
    #[arg(long)]
    pub output: PathBuf,
    /// Apply the model twice (n to n squared).
    #[arg(long)]
    pub twice: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference image or directory.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Test image or directory; repeat for several methods.
    #[arg(long, required = true)]
    pub test: Vec<PathBuf>,
    /// Method label per --test (defaults to the test path's name).
    #[arg(long)]
    pub method: Vec<String>,
    /// Per-image CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-method JSON summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Use a data range of 1 instead of the joint range of both images.
    #[arg(long)]
    pub fixed_range: bool,
}

#[derive(Debug, Args)]
pub struct DiffmapArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Display map scaled to the largest difference.
    #[arg(long)]
    pub out: PathBuf,
    /// Unscaled map, written at 16 bits.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    /// CSV file for a single input, otherwise a directory.
    #[arg(long)]
    pub out: PathBuf,
}
