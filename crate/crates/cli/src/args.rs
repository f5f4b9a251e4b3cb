use clap::{Args, Parser, Subcommand};
use rifd::wavelet::{
    Backend, Boundary, DenoiseSettings, Family, ThresholdMode, ThresholdRule, ThresholdSelection,
    WaveletSpec,
};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "rifd", version, about = "Rotation-aware patch detector")]
pub struct Cli {
    /// Flat JSON object of default flag values; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset (scenes, patches, manifest).
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Train a model bundle from labeled patches.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Scan an image and report detections.
    #[command(args_override_self = true)]
    Detect(DetectArgs),
    /// Score a model on a labeled dataset.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Wavelet de-noise a PGM image.
    #[command(args_override_self = true)]
    Denoise(DenoiseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of scenes.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Number of labeled training patches.
    #[arg(long, default_value_t = 0)]
    pub patches: usize,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    pub angle_min: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub angle_max: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Relative brightness jitter of the pasted template.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 15)]
    pub window: usize,
}

/// Wavelet de-noising flags shared by `train` and `denoise`.
#[derive(Debug, Args)]
pub struct WaveletArgs {
    #[arg(long, default_value = "haar")]
    pub family: Family,
    #[arg(long, default_value = "periodic")]
    pub boundary: Boundary,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Shrinkage rule: soft or hard.
    #[arg(long, default_value = "soft")]
    pub mode: ThresholdMode,
    /// Fixed threshold instead of the universal one.
    #[arg(long, value_name = "T")]
    pub fixed_t: Option<f64>,
    #[arg(long, default_value = "dwt")]
    pub backend: Backend,
}

impl WaveletArgs {
    pub fn settings(&self) -> DenoiseSettings {
        DenoiseSettings {
            wavelet: WaveletSpec::new(self.family, self.boundary),
            levels: self.levels,
            rule: ThresholdRule {
                mode: self.mode,
                selection: match self.fixed_t {
                    Some(t) => ThresholdSelection::Fixed(t),
                    None => ThresholdSelection::Universal,
                },
            },
            backend: self.backend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpreadArg {
    Auto,
    Fixed(f64),
}

pub fn parse_spread(s: &str) -> Result<SpreadArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SpreadArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(SpreadArg::Fixed(v)),
        _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["manifest", "data_dir"]))]
pub struct TrainArgs {
    /// Dataset manifest listing labeled patches.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Directory of PGM patches with a `labels.csv` of `file,angle_deg`.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub window: usize,
    /// Fixed PCA rank (overrides --variance).
    #[arg(long)]
    pub pca_k: Option<usize>,
    /// Explained-variance fraction used to pick the PCA rank.
    #[arg(long, default_value_t = 0.95)]
    pub variance: f64,
    /// Upper bound on the variance-selected rank.
    #[arg(long, default_value_t = 40)]
    pub max_k: usize,
    /// GRNN spread, or `auto` for leave-one-out selection.
    #[arg(long, default_value = "auto", value_parser = parse_spread)]
    pub spread: SpreadArg,
    /// Quantile of training densities used as the detection threshold.
    #[arg(long, default_value_t = 0.01)]
    pub quantile: f64,
    /// Contrast floor as a fraction of the low-quantile training contrast.
    #[arg(long, default_value_t = 0.5)]
    pub contrast_fraction: f64,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    /// Recorded in the model file.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Scan flags shared by `detect` and `eval`.
#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 1.2)]
    pub scale_factor: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_scale: f64,
    #[arg(long)]
    pub max_scale: Option<f64>,
    #[arg(long)]
    pub max_levels: Option<usize>,
    /// Density threshold instead of the calibrated one.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Contrast floor instead of the calibrated one (0 disables).
    #[arg(long)]
    pub min_contrast: Option<f64>,
    /// IoU above which weaker overlapping boxes are dropped.
    #[arg(long, default_value_t = 0.3)]
    pub nms: f64,
    /// De-noise each pyramid level once instead of every window.
    #[arg(long)]
    pub whole_image: bool,
    /// Worker threads (default: available cores).
    #[arg(long, env = "RIFD_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    #[command(flatten)]
    pub scan: ScanArgs,
    /// Write the detection JSON here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub json_out: Option<PathBuf>,
    /// Write a copy of the image with boxes and angle lines drawn in.
    #[arg(long, value_name = "FILE")]
    pub annotate_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE", required_unless_present = "oracle")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Score the ground truth itself instead of running the detector.
    #[arg(long)]
    pub oracle: bool,
    /// Also train the Rprop network on the training manifest for comparison.
    #[arg(long, requires = "train_manifest")]
    pub baseline: bool,
    /// Manifest with the training patches (needed by --baseline).
    #[arg(long, value_name = "FILE")]
    pub train_manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Text report (also printed to standard output).
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub metrics_csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "baseline")]
    pub timing_csv: Option<PathBuf>,
    /// Rprop epoch history (`epoch,mse`).
    #[arg(long, value_name = "FILE", requires = "baseline")]
    pub history_csv: Option<PathBuf>,
    #[command(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
}
