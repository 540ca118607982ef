use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "vessaff",
    version,
    about = "Affinity fields, losses and topology-aware evaluation for vessel masks"
)]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the ground-truth affinity field of a mask and write it as AFF
    Affinity(AffinityArgs),
    /// Print the segmentation, affinity and ACD loss terms as JSON
    Loss(LossArgs),
    /// Apply affinity-gated feature strengthening to an AFF feature map
    Strengthen(StrengthenArgs),
    /// Evaluate a directory of predictions against ground truth
    Eval(EvalArgs),
    /// Write a global contrast sweep of one image or a directory of images
    Perturb(PerturbArgs),
    /// Generate a synthetic vessel tree with a degraded prediction
    Synth(SynthArgs),
    /// Run the built-in oracle and finite-difference checks
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Read default flag values from a key=value file (command-line flags take precedence)
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AffinityArgs {
    /// Binary vessel mask (PGM or PNG)
    #[arg(long, value_name = "FILE")]
    pub mask: PathBuf,
    /// Comma-separated odd window sizes, ascending
    #[arg(long, value_delimiter = ',', default_value = "3", value_name = "K,..")]
    pub scales: Vec<u32>,
    /// Output AFF file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Foreground cut-off as a fraction of full intensity
    #[arg(long, default_value_t = 0.5, value_name = "T")]
    pub binarize_threshold: f64,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Predicted vessel probability image; intensity / 255 is the probability
    #[arg(long, value_name = "FILE")]
    pub pred_seg: PathBuf,
    /// Ground-truth vessel mask
    #[arg(long, value_name = "FILE")]
    pub gt_seg: PathBuf,
    /// Predicted affinity field (AFF)
    #[arg(long, value_name = "FILE")]
    pub pred_aff: PathBuf,
    /// Ground-truth affinity field (AFF); computed from --gt-seg when omitted
    #[arg(long, value_name = "FILE")]
    pub gt_aff: Option<PathBuf>,
    /// Weight of the ACD term
    #[arg(long, default_value_t = vessaff::losses::DEFAULT_LAMBDA_B, value_name = "W")]
    pub lambda_b: f64,
    /// Probability clamp and zero-norm guard
    #[arg(long, default_value_t = vessaff::losses::DEFAULT_EPSILON, value_name = "EPS")]
    pub epsilon: f64,
    /// Foreground cut-off for --gt-seg as a fraction of full intensity
    #[arg(long, default_value_t = 0.5, value_name = "T")]
    pub binarize_threshold: f64,
    /// Also write the JSON breakdown to this file
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct StrengthenArgs {
    /// Feature map (AFF, feature kind)
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Predicted affinity field (AFF)
    #[arg(long, value_name = "FILE")]
    pub pred_aff: PathBuf,
    /// Per-scale weights (AFF, scale-weight kind) for supervised strengthening
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "unsupervised",
        conflicts_with = "unsupervised"
    )]
    pub weights: Option<PathBuf>,
    /// Use the unsupervised variant (mean affinity as the weight)
    #[arg(long)]
    pub unsupervised: bool,
    /// Output AFF file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    /// Average per-image metrics
    Mean,
    /// Recompute metrics from summed counts
    Pooled,
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads [default: logical cores]
    #[arg(long, env = "VESSAFF_JOBS", hide_env_values = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted masks (PGM or PNG)
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Directory of ground-truth masks, paired with --pred by file stem
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// Buffer width in pixels for centerline matching
    #[arg(long, default_value_t = vessaff::metrics::THRESHOLD_ANGIO, value_name = "PX")]
    pub threshold: f64,
    /// Also report thin and thick vessels separately
    #[arg(long)]
    pub stratify: bool,
    /// Vessel width separating thin from thick
    #[arg(long, default_value_t = vessaff::metrics::stratify::DEFAULT_THICKNESS_THRESHOLD, value_name = "PX")]
    pub thickness_threshold: f64,
    /// Search range for thin vessels
    #[arg(long, default_value_t = vessaff::metrics::stratify::DEFAULT_THIN_RANGE, value_name = "PX")]
    pub thin_range: f64,
    /// Search range for thick vessels
    #[arg(long, default_value_t = vessaff::metrics::stratify::DEFAULT_THICK_RANGE, value_name = "PX")]
    pub thick_range: f64,
    /// Dataset-level aggregation
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    /// Report format
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Foreground cut-off as a fraction of full intensity
    #[arg(long, default_value_t = 0.5, value_name = "T")]
    pub binarize_threshold: f64,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    /// 1.7,1.6,1.5,0.9,0.85,0.8
    Xcad,
    /// 1.3,1.2,1.1,0.4,0.3,0.2
    Drive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ColorArg {
    /// Convert colour inputs to one luminance plane
    Luminance,
    /// Edit each colour channel around its own mean
    PerChannel,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Image file, or a directory of images
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Comma-separated contrast ratios
    #[arg(
        long,
        value_delimiter = ',',
        value_name = "R,..",
        required_unless_present = "preset",
        conflicts_with = "preset"
    )]
    pub ratios: Vec<f64>,
    /// Named ratio list
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Output directory; files are named STEM_xRATIO
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Colour handling
    #[arg(long, value_enum, default_value = "luminance")]
    pub color: ColorArg,
    /// Keep values outside [0, 255] and write AFF real maps instead of images
    #[arg(long)]
    pub no_clamp: bool,
    #[command(flatten)]
    pub jobs: JobsArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImageFormatArg {
    Pgm,
    Png,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Random seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Canvas width
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    /// Canvas height
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Number of vessel segments
    #[arg(long, default_value_t = 7)]
    pub branches: usize,
    /// Narrowest vessel width in pixels
    #[arg(long, default_value_t = 2.0)]
    pub min_width: f64,
    /// Widest (root) vessel width in pixels
    #[arg(long, default_value_t = 7.0)]
    pub max_width: f64,
    /// Uniform angle jitter in degrees
    #[arg(long, default_value_t = 15.0)]
    pub angle_jitter: f64,
    /// Shortest segment length in pixels
    #[arg(long, default_value_t = 20.0)]
    pub min_length: f64,
    /// Longest segment length in pixels
    #[arg(long, default_value_t = 36.0)]
    pub max_length: f64,
    /// Gaps cut into the degraded prediction
    #[arg(long, default_value_t = 0)]
    pub breaks: usize,
    /// Dilation radius of the degraded prediction
    #[arg(long, default_value_t = 0.0)]
    pub dilation: f64,
    /// Probability of spurious isolated pixels in the prediction
    #[arg(long, default_value_t = 0.0)]
    pub noise_rate: f64,
    /// Vessel darkening in the rendered image, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub contrast: f64,
    /// Gaussian noise sigma of the rendered image
    #[arg(long, default_value_t = 8.0)]
    pub noise_sigma: f64,
    /// Image file format
    #[arg(long, value_enum, default_value = "pgm")]
    pub format: ImageFormatArg,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Seed for the randomized corpora
    #[arg(long, default_value_t = vessaff::selfcheck::DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArg,
}
