//! `mhiforge` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors. Data
//! errors are reported as `error: <Variant>: <detail>` on stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mhiforge::attention::tensor::load_many;
use mhiforge::attention::{apply_saliency, non_local_block, saliency_from_features, FeatureVolume, NonLocalParams};
use mhiforge::bench::{run_bench, BenchConfig};
use mhiforge::frame_stream::netpbm;
use mhiforge::fusion::LogitsFile;
use mhiforge::mhi::{compute_mhi, quantize_mhi, Weighting};
use mhiforge::preprocess::{
    augment_set, plan_sampling, sample_frames, AugmentConfig, BoundingBox, DEFAULT_MAX_SKIP, DEFAULT_RESIZE,
    DEFAULT_SHIFT_LIMIT, DEFAULT_TARGET_FRAMES,
};
use mhiforge::rgb_mhi::{compute_rgb_mhi_with, quantize_rgb_mhi};
use mhiforge::{fuse, ColorMode, Error, Frame, FrameStream, FusionWeights, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mhiforge",
    version,
    about = "Motion history images and gesture-video preprocessing"
)]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Optional key=value file with defaults; explicit flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for cross-video parallelism.
    #[arg(long, global = true, env = "MHIFORGE_JOBS", value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-channel motion history image, written as 8-bit PGM.
    Mhi(IoArgs),
    /// Three-part RGB motion history image, written as 8-bit PPM.
    RgbMhi {
        #[command(flatten)]
        io: IoArgs,
        /// Weight every step equally instead of by recency.
        #[arg(long)]
        uniform_weights: bool,
    },
    /// Reweight features by the spatial saliency of motion features.
    Attend {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        saliency_src: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Apply a non-local block to a feature tensor.
    Nlblock {
        #[arg(long)]
        input: PathBuf,
        /// Four concatenated tensors: theta, phi, g, w_z.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Spatial max-pool factor applied to the phi and g branches.
        #[arg(long, default_value_t = 2)]
        pool_factor: usize,
    },
    /// Late fusion of two logit files.
    Fuse {
        #[arg(long)]
        logits1: PathBuf,
        #[arg(long)]
        logits2: PathBuf,
        #[arg(long)]
        w1: Option<f64>,
        #[arg(long)]
        w2: Option<f64>,
        /// Also write the JSON result here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Pick a fixed number of frames spread over the clip.
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        max_skip: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write six cropped, resized and flipped copies of a video.
    Augment {
        #[arg(long)]
        input: PathBuf,
        /// Signer box `x,y,w,h`; defaults to the manifest's bbox line.
        #[arg(long)]
        bbox: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shift_limit: Option<usize>,
        #[arg(long)]
        resize: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Synthetic gesture benchmark.
    Bench {
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.8)]
        train_frac: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Frame directory or manifest file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

/// Values a config file may set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub target_frames: usize,
    pub max_skip: usize,
    pub shift_limit: usize,
    pub resize: usize,
    pub w1: f64,
    pub w2: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let weights = FusionWeights::default();
        Self {
            target_frames: DEFAULT_TARGET_FRAMES,
            max_skip: DEFAULT_MAX_SKIP,
            shift_limit: DEFAULT_SHIFT_LIMIT,
            resize: DEFAULT_RESIZE,
            w1: weights.w1(),
            w2: weights.w2(),
            seed: 42,
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::InvalidConfig(format!("line {}: bad value {value:?} for {key}", n + 1));
            match key {
                "target_frames" => cfg.target_frames = value.parse().map_err(|_| bad())?,
                "max_skip" => cfg.max_skip = value.parse().map_err(|_| bad())?,
                "shift_limit" => cfg.shift_limit = value.parse().map_err(|_| bad())?,
                "resize" => cfg.resize = value.parse().map_err(|_| bad())?,
                "w1" => cfg.w1 = value.parse().map_err(|_| bad())?,
                "w2" => cfg.w2 = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::InvalidConfig(format!("line {}: unknown key {key}", n + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_frames == 0 || self.resize == 0 {
            return Err(Error::InvalidConfig("target_frames and resize must be positive".into()));
        }
        FusionWeights::new(self.w1, self.w2)?;
        Ok(())
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let summary = match cli.command {
        Command::Mhi(io) => {
            let mhi = compute_mhi(FrameStream::open(&io.input)?)?;
            write_frame(&io.output, &quantize_mhi(&mhi))?;
            json!({
                "output": io.output,
                "width": mhi.width(),
                "height": mhi.height(),
                "frames": mhi.source_frame_count(),
                "max": mhi.max(),
            })
        }
        Command::RgbMhi { io, uniform_weights } => {
            let weighting = if uniform_weights {
                Weighting::Uniform
            } else {
                Weighting::Recency
            };
            let img = compute_rgb_mhi_with(FrameStream::open(&io.input)?, weighting)?;
            write_frame(&io.output, &quantize_rgb_mhi(&img))?;
            let parts: Vec<[usize; 2]> = img.part_bounds().iter().map(|r| [*r.start(), *r.end()]).collect();
            json!({
                "output": io.output,
                "width": img.width(),
                "height": img.height(),
                "parts": parts,
                "max": img.max(),
            })
        }
        Command::Attend {
            features,
            saliency_src,
            output,
        } => {
            let features = FeatureVolume::load(&features)?;
            let map = saliency_from_features(&FeatureVolume::load(&saliency_src)?)?;
            let out = apply_saliency(&features, &map)?;
            out.save(&output)?;
            json!({ "output": output, "dims": out.dims(), "degenerate": map.is_degenerate() })
        }
        Command::Nlblock {
            input,
            params,
            output,
            pool_factor,
        } => {
            let x = FeatureVolume::load(&input)?;
            let params = NonLocalParams::from_tensors(load_many(&params, 4)?, pool_factor)?;
            let out = non_local_block(&x, &params)?;
            out.save(&output)?;
            json!({ "output": output, "dims": out.dims() })
        }
        Command::Fuse {
            logits1,
            logits2,
            w1,
            w2,
            output,
        } => {
            let weights = FusionWeights::new(w1.unwrap_or(cfg.w1), w2.unwrap_or(cfg.w2))?;
            let a = read_logits(&logits1)?;
            let b = read_logits(&logits2)?;
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} rows vs {} rows",
                    a.len(),
                    b.len()
                )));
            }
            let fused = a
                .iter()
                .zip(&b)
                .map(|(x1, x2)| fuse(x1, x2, weights))
                .collect::<Result<Vec<_>>>()?;
            let result = json!({
                "w1": weights.w1(),
                "w2": weights.w2(),
                "predictions": fused.iter().map(|f| f.predicted_class).collect::<Vec<_>>(),
                "probabilities": fused.iter().map(|f| &f.probabilities).collect::<Vec<_>>(),
            });
            if let Some(path) = &output {
                write_text(path, &result.to_string())?;
            }
            // The result is the product here, so it always goes to stdout.
            println!("{result}");
            return Ok(());
        }
        Command::Sample {
            input,
            frames,
            max_skip,
            output,
        } => {
            let stream = FrameStream::open(&input)?;
            let plan = plan_sampling(
                stream.frame_count(),
                frames.unwrap_or(cfg.target_frames),
                max_skip.unwrap_or(cfg.max_skip),
            )?;
            let picked = sample_frames(stream, &plan)?;
            write_video(&output, &picked)?;
            json!({
                "output": output,
                "source_frames": plan.source_count,
                "skip": plan.skip_head,
                "indices": plan.indices,
            })
        }
        Command::Augment {
            input,
            bbox,
            seed,
            shift_limit,
            resize,
            output,
        } => {
            let stream = FrameStream::open(&input)?;
            let bbox = match bbox {
                Some(text) => BoundingBox::parse(&text)?,
                None => stream
                    .bbox()
                    .ok_or_else(|| Error::InvalidBox("no --bbox given and the input has no bbox line".into()))?,
            };
            let frames = stream.collect::<Result<Vec<_>>>()?;
            let config = AugmentConfig {
                shift_limit: shift_limit.unwrap_or(cfg.shift_limit),
                resize: resize.unwrap_or(cfg.resize),
            };
            if config.resize == 0 {
                return Err(Error::InvalidConfig("resize must be positive".into()));
            }
            let seed = seed.unwrap_or(cfg.seed);
            let videos = augment_set(&frames, bbox, seed, &config)?;
            let mut variants = Vec::new();
            for v in &videos {
                let label = v.variant.label();
                write_video(&output.join(&label), &v.frames)?;
                variants.push(json!({
                    "label": label,
                    "crop": [v.crop.x, v.crop.y, v.crop.w, v.crop.h],
                    "vertical_shift": v.variant.vertical_shift,
                }));
            }
            json!({ "output": output, "seed": seed, "variants": variants })
        }
        Command::Bench {
            classes,
            samples,
            seed,
            train_frac,
            report,
        } => {
            let result = run_bench(&BenchConfig {
                classes,
                samples,
                seed: seed.unwrap_or(cfg.seed),
                train_frac,
                jobs: cli.jobs.unwrap_or(0),
            })?;
            let text = serde_json::to_string_pretty(&result).map_err(|e| Error::Malformed(e.to_string()))?;
            if let Some(path) = &report {
                write_text(path, &text)?;
            }
            if !cli.json {
                println!(
                    "accuracy {:.4} (middle frame {:.4})",
                    result.accuracy, result.center_frame_accuracy
                );
                for row in &result.fusion {
                    println!("fusion ({}, {}) {:.4}", row.w1, row.w2, row.accuracy);
                }
            }
            serde_json::to_value(&result).map_err(|e| Error::Malformed(e.to_string()))?
        }
    };
    if cli.json {
        println!("{summary}");
    } else if let Some(out) = summary.get("output") {
        println!("wrote {}", out.as_str().unwrap_or_default());
    }
    Ok(())
}

fn read_logits(path: &Path) -> Result<Vec<mhiforge::LogitVector>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let file: LogitsFile =
        serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    file.into_vectors()
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    Ok(fs::write(path, text)?)
}

fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    ensure_parent(path)?;
    netpbm::write_frame(path, frame)
}

/// Writes `frame_0001.pgm` (or `.ppm`), ... into `dir`.
fn write_video(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        let ext = match f.mode() {
            ColorMode::Gray8 => "pgm",
            ColorMode::Rgb8 => "ppm",
        };
        netpbm::write_frame(&dir.join(format!("frame_{:04}.{ext}", i + 1)), f)?;
    }
    Ok(())
}
