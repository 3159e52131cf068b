//! Command-line definitions and config-file merging.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use surdcnn::model::InitScheme;
use surdcnn::train::Precision;

#[derive(Debug, Parser)]
#[command(
    name = "surdcnn",
    version,
    about = "Joint 2x super-resolution and denoising with a residual CNN"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a patch dataset from a directory of PPM images.
    Prepare(PrepareArgs),
    /// Train a network on a prepared dataset.
    Train(TrainArgs),
    /// Upscale and denoise one image.
    Infer(InferArgs),
    /// Compare bicubic and network PSNR on clean/degraded pairs.
    Eval(EvalArgs),
    /// Print parameter counts and a weight-file dump.
    Inspect(InspectArgs),
    /// Apply synthetic noise to an image.
    Noise(NoiseArgs),
}

/// Shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// File of `key = value` lines mirroring the long flags; flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long, env = "SURDNET_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of convolution layers.
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    /// Channels of the hidden layers.
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of clean PPM images.
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Dataset file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Manifest to write (default: dataset path with a .manifest extension).
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub patches_per_image: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Largest Gaussian noise variance.
    #[arg(long)]
    pub gaussian_var_max: Option<f64>,
    /// Smallest Poisson scale (strongest shot noise).
    #[arg(long)]
    pub poisson_scale_min: Option<f64>,
    /// Largest Poisson scale.
    #[arg(long)]
    pub poisson_scale_max: Option<f64>,
    /// Poisson scales of order 1e10 to 1e11 instead of the calibrated range.
    #[arg(long)]
    pub literal_poisson: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Dataset file from `prepare`.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Checkpoint written after every epoch.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Metrics CSV (default: checkpoint path with a .csv extension).
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    /// Plain weight file written after the last epoch.
    #[arg(long, value_name = "FILE")]
    pub weights_out: Option<PathBuf>,
    /// Learning rate 2e-9, no clipping, 50 epochs; explicit flags still apply.
    #[arg(long)]
    pub paper_literal: bool,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Global gradient-norm clip.
    #[arg(long, conflicts_with = "no_clip")]
    pub clip: Option<f64>,
    /// Disable gradient clipping.
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value = "f32")]
    pub precision: Precision,
    /// Weight initialization: he or unit-normal.
    #[arg(long, default_value = "he")]
    pub init: InitScheme,
    /// Continue from the checkpoint.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    /// Noisy low-resolution PPM.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output PPM at twice the size.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    /// Directory of clean high-resolution PPMs.
    #[arg(long, value_name = "DIR")]
    pub clean: PathBuf,
    /// Directory of degraded PPMs with the same file names.
    #[arg(long, value_name = "DIR")]
    pub degraded: PathBuf,
    /// Also write the report as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Weight file or checkpoint; without it a fresh network is described.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "he")]
    pub init: InitScheme,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long)]
    pub gaussian_var: Option<f64>,
    #[arg(long)]
    pub poisson_scale: Option<f64>,
    /// Halve the image with the bicubic resampler before adding noise.
    #[arg(long)]
    pub downscale: bool,
}

/// Expands `--config FILE` into flags placed right after the subcommand,
/// so that flags given on the command line (which come later) win.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(sub_pos) = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(argv);
    };
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(sub_pos + 1) {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if let Some(v) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(v));
        } else if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let sub_name = argv[sub_pos].to_string_lossy().into_owned();
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&sub_name) else {
        return Ok(argv);
    };

    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| {
                format!(
                    "{}:{}: unknown key `{key}` for `{sub_name}`",
                    path.display(),
                    n + 1
                )
            })?;
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}")));
            extra.push(OsString::from(value));
        } else {
            match value {
                "true" | "yes" | "1" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" => {}
                _ => {
                    return Err(format!(
                        "{}:{}: `{key}` expects true or false",
                        path.display(),
                        n + 1
                    ))
                }
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}
