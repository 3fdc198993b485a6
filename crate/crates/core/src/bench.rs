//! Synthetic gesture benchmark.
//!
//! Renders a bright anti-aliased blob moving along one of eight trajectories
//! on a black background. The classes are built to be hard for single-frame
//! appearance: the two sweeps on each axis and the two circle directions
//! visit the same pixels in a different order, and the two tap classes differ
//! only in how many times the motion repeats. RGB-MHI features are classified
//! with a nearest-centroid rule, and a second representation (the middle
//! frame) is late-fused with it over a weight grid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame_stream::{ColorMode, Frame, FrameStream};
use crate::fusion::{sweep_fuse, FusionWeights, LogitVector};
use crate::mhi::MotionHistoryImage;
use crate::rgb_mhi::compute_rgb_mhi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trajectory {
    SweepLeft,
    SweepRight,
    SweepUp,
    SweepDown,
    CircleCw,
    CircleCcw,
    TapOnce,
    TapThrice,
}

impl Trajectory {
    pub const ALL: [Trajectory; 8] = [
        Trajectory::SweepLeft,
        Trajectory::SweepRight,
        Trajectory::SweepUp,
        Trajectory::SweepDown,
        Trajectory::CircleCw,
        Trajectory::CircleCcw,
        Trajectory::TapOnce,
        Trajectory::TapThrice,
    ];

    /// Blob center at progress `u` in `[0, 1]`, in unit-square coordinates
    /// with y pointing down.
    pub fn position(self, u: f64) -> (f64, f64) {
        const SWEEP: f64 = 0.6;
        const RADIUS: f64 = 0.25;
        match self {
            Trajectory::SweepLeft => (0.8 - SWEEP * u, 0.5),
            Trajectory::SweepRight => (0.2 + SWEEP * u, 0.5),
            Trajectory::SweepUp => (0.5, 0.8 - SWEEP * u),
            Trajectory::SweepDown => (0.5, 0.2 + SWEEP * u),
            Trajectory::CircleCw | Trajectory::CircleCcw => {
                let dir = if self == Trajectory::CircleCw { 1.0 } else { -1.0 };
                let angle = -PI / 2.0 + dir * 2.0 * PI * u;
                (0.5 + RADIUS * angle.cos(), 0.5 + RADIUS * angle.sin())
            }
            Trajectory::TapOnce => (0.5, 0.45 + tap_offset(u, 1)),
            Trajectory::TapThrice => (0.5, 0.45 + tap_offset(u, 3)),
        }
    }
}

const TAP_WIDTH: f64 = 0.14;
const TAP_DEPTH: f64 = 0.15;

/// Downward excursion of `count` evenly spaced taps, each a half sine bump.
fn tap_offset(u: f64, count: usize) -> f64 {
    (0..count)
        .map(|m| {
            let center = (2 * m + 1) as f64 / (2 * count) as f64;
            let s = (u - center) / TAP_WIDTH + 0.5;
            if (0.0..=1.0).contains(&s) {
                TAP_DEPTH * (PI * s).sin()
            } else {
                0.0
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GestureSpec {
    pub class_id: usize,
    pub trajectory: Trajectory,
    pub blob_radius: f64,
    /// Relative speed range: progress runs at `1 ± speed_jitter`.
    pub speed_jitter: f64,
    /// Whole-trajectory translation range, in pixels.
    pub start_jitter: f64,
    pub frame_count: usize,
    /// Frames are square, `frame_size` pixels on a side.
    pub frame_size: usize,
}

impl GestureSpec {
    pub fn new(class_id: usize, trajectory: Trajectory) -> Self {
        Self {
            class_id,
            trajectory,
            blob_radius: 5.0,
            speed_jitter: 0.15,
            start_jitter: 4.0,
            frame_count: 36,
            frame_size: 64,
        }
    }

    /// The first `classes` trajectories with default rendering parameters.
    pub fn standard_set(classes: usize) -> Result<Vec<Self>> {
        if classes == 0 || classes > Trajectory::ALL.len() {
            return Err(Error::InvalidConfig(format!(
                "class count must be in 1..={}, got {classes}",
                Trajectory::ALL.len()
            )));
        }
        Ok(Trajectory::ALL[..classes]
            .iter()
            .enumerate()
            .map(|(i, &t)| Self::new(i, t))
            .collect())
    }

    pub fn without_jitter(mut self) -> Self {
        self.speed_jitter = 0.0;
        self.start_jitter = 0.0;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.frame_count < 6 {
            return Err(Error::InsufficientFrames {
                needed: 6,
                got: self.frame_count,
            });
        }
        if self.frame_size == 0 || self.blob_radius.is_nan() || self.blob_radius <= 0.0 {
            return Err(Error::InvalidConfig(format!("bad gesture geometry {self:?}")));
        }
        Ok(())
    }

    /// Renders one video; the jitter is drawn from `rng`.
    pub fn render(&self, rng: &mut impl Rng) -> Result<Vec<Frame>> {
        self.validate()?;
        let speed = 1.0 + self.speed_jitter * rng.gen_range(-1.0..=1.0);
        let phase = 0.3 * self.speed_jitter * rng.gen_range(-1.0..=1.0);
        let dx = self.start_jitter * rng.gen_range(-1.0..=1.0);
        let dy = self.start_jitter * rng.gen_range(-1.0..=1.0);
        let size = self.frame_size as f64;
        let last = (self.frame_count - 1) as f64;
        (0..self.frame_count)
            .map(|t| {
                let u = (0.5 + (t as f64 / last - 0.5) * speed + phase).clamp(0.0, 1.0);
                let (x, y) = self.trajectory.position(u);
                render_disc(self.frame_size, x * size + dx, y * size + dy, self.blob_radius)
                    .map(|f| f.with_index(t + 1))
            })
            .collect()
    }
}

/// A disc with coverage-based anti-aliasing: a pixel whose center lies at
/// distance `d` from the disc center gets `clamp(r + 0.5 - d, 0, 1)`.
fn render_disc(size: usize, cx: f64, cy: f64, radius: f64) -> Result<Frame> {
    let mut pixels = vec![0u8; size * size];
    for (i, px) in pixels.iter_mut().enumerate() {
        let x = (i % size) as f64 + 0.5;
        let y = (i / size) as f64 + 0.5;
        let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        let coverage = (radius + 0.5 - d).clamp(0.0, 1.0);
        *px = (255.0 * coverage).round() as u8;
    }
    Frame::new(size, size, ColorMode::Gray8, pixels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVideo {
    pub class_id: usize,
    pub sample: usize,
    pub frames: Vec<Frame>,
}

fn sample_rng(seed: u64, class_id: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class_id as u64) << 32) | sample as u64);
    rng
}

/// Renders one video for `spec`, reproducible from `(seed, class, sample)`.
pub fn render_sample(spec: &GestureSpec, sample: usize, seed: u64) -> Result<LabeledVideo> {
    let frames = spec.render(&mut sample_rng(seed, spec.class_id, sample))?;
    Ok(LabeledVideo {
        class_id: spec.class_id,
        sample,
        frames,
    })
}

/// All samples, ordered by class then sample index.
pub fn generate_dataset(specs: &[GestureSpec], samples_per_class: usize, seed: u64) -> Result<Vec<LabeledVideo>> {
    if samples_per_class == 0 {
        return Err(Error::InvalidConfig("samples per class must be positive".into()));
    }
    specs
        .iter()
        .flat_map(|spec| (0..samples_per_class).map(move |s| render_sample(spec, s, seed)))
        .collect()
}

/// Feature grid side used for every representation.
pub const FEATURE_GRID: usize = 32;

/// Box-filter downsampling of a row-major plane to `grid x grid`.
fn downsample(plane: &[f64], width: usize, height: usize, grid: usize) -> Vec<f64> {
    let bounds = |i: usize, len: usize| {
        let lo = i * len / grid;
        let hi = ((i + 1) * len / grid).max(lo + 1).min(len);
        (lo.min(len - 1), hi)
    };
    let mut out = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        let (y0, y1) = bounds(gy, height);
        for gx in 0..grid {
            let (x0, x1) = bounds(gx, width);
            let mut sum = 0.0;
            for y in y0..y1 {
                sum += plane[y * width + x0..y * width + x1].iter().sum::<f64>();
            }
            out.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// RGB-MHI accumulators downsampled to 32x32 per channel, flattened B, G, R
/// and L2-normalized: `32 * 32 * 3` values.
pub fn rgb_mhi_features(frames: &[Frame]) -> Result<Vec<f64>> {
    let img = compute_rgb_mhi(FrameStream::from_frames(frames.to_vec())?)?;
    let mut v = Vec::with_capacity(3 * FEATURE_GRID * FEATURE_GRID);
    for channel in img.channels() {
        v.extend(downsample(channel.accum(), img.width(), img.height(), FEATURE_GRID));
    }
    Ok(l2_normalize(v))
}

/// The middle frame's intensities downsampled to 32x32 and L2-normalized.
pub fn center_frame_features(frames: &[Frame]) -> Result<Vec<f64>> {
    let middle = frames
        .get(frames.len().saturating_sub(1) / 2)
        .ok_or(Error::EmptyStream)?;
    let plane: Vec<f64> = crate::frame_stream::to_grayscale(middle.clone())
        .pixels()
        .iter()
        .map(|&p| p as f64)
        .collect();
    Ok(l2_normalize(downsample(
        &plane,
        middle.width(),
        middle.height(),
        FEATURE_GRID,
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub label: usize,
    pub features: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One centroid per class; predicts the Euclidean-nearest one.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    /// Classes are `0..=max label`; every one of them needs a training sample.
    pub fn fit(train: &[LabeledVector]) -> Result<Self> {
        Self::fit_classes(train, 0)
    }

    /// As [`fit`](Self::fit), with at least `classes` classes expected.
    pub fn fit_classes(train: &[LabeledVector], classes: usize) -> Result<Self> {
        let classes = train.iter().map(|s| s.label + 1).max().unwrap_or(0).max(classes);
        if classes == 0 {
            return Err(Error::IncompleteTrainSet(0));
        }
        let dim = train[0].features.len();
        let mut sums = vec![vec![0.0; dim]; classes];
        let mut counts = vec![0usize; classes];
        for s in train {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "feature length {} vs {dim}",
                    s.features.len()
                )));
            }
            counts[s.label] += 1;
            for (acc, v) in sums[s.label].iter_mut().zip(&s.features) {
                *acc += v;
            }
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::IncompleteTrainSet(missing));
        }
        for (sum, &n) in sums.iter_mut().zip(&counts) {
            for v in sum.iter_mut() {
                *v /= n as f64;
            }
        }
        Ok(Self { centroids: sums })
    }

    pub fn classes(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Negative squared distance to each centroid.
    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        self.centroids.iter().map(|c| -squared_distance(c, features)).collect()
    }

    /// Nearest centroid; ties go to the lowest class id.
    pub fn predict(&self, features: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = squared_distance(c, features);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Top-1 accuracy of a nearest-centroid classifier fit on `train`.
pub fn nearest_centroid_eval(train: &[LabeledVector], test: &[LabeledVector]) -> Result<f64> {
    let classes = test.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let model = NearestCentroid::fit_classes(train, classes)?;
    if test.is_empty() {
        return Err(Error::DimensionMismatch("empty test set".into()));
    }
    let correct = test.iter().filter(|s| model.predict(&s.features) == s.label).count();
    Ok(correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusionRow {
    pub w1: f64,
    pub w2: f64,
    pub accuracy: f64,
}

/// Accuracy of `softmax(w1 x1 + w2 x2)` for each weight pair.
pub fn fusion_bench(
    first_logits: &[LogitVector],
    second_logits: &[LogitVector],
    labels: &[usize],
    weight_grid: &[FusionWeights],
) -> Result<Vec<FusionRow>> {
    let acc = sweep_fuse(first_logits, second_logits, labels, weight_grid)?;
    Ok(weight_grid
        .iter()
        .zip(acc)
        .map(|(w, accuracy)| FusionRow {
            w1: w.w1(),
            w2: w.w2(),
            accuracy,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub classes: usize,
    pub samples: usize,
    pub seed: u64,
    pub train_frac: f64,
    /// Worker threads for cross-video parallelism; 0 uses the rayon default.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            samples: 50,
            seed: 42,
            train_frac: 0.8,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub classes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub trajectories: Vec<Trajectory>,
    /// Nearest-centroid accuracy on RGB-MHI features.
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true][predicted]` counts for the RGB-MHI classifier.
    pub confusion: Vec<Vec<usize>>,
    /// Nearest-centroid accuracy on middle-frame features.
    pub center_frame_accuracy: f64,
    /// RGB-MHI logits weighted by `w1`, middle-frame logits by `w2`.
    pub fusion: Vec<FusionRow>,
}

/// Weight pairs in the benchmark's fusion table: both standalone models and
/// the reference sweep between them.
pub fn bench_weight_grid() -> Vec<FusionWeights> {
    let mut grid = vec![FusionWeights::new(1.0, 0.0).expect("valid")];
    grid.extend(FusionWeights::reference_grid());
    grid.push(FusionWeights::new(0.0, 1.0).expect("valid"));
    grid
}

struct Features {
    label: usize,
    sample: usize,
    motion: Vec<f64>,
    center: Vec<f64>,
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let specs = GestureSpec::standard_set(config.classes)?;
    if config.samples < 2 {
        return Err(Error::InvalidConfig("need at least two samples per class".into()));
    }
    if !(config.train_frac > 0.0 && config.train_frac < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} not in (0, 1)",
            config.train_frac
        )));
    }
    let train_per_class = ((config.samples as f64 * config.train_frac).round() as usize).clamp(1, config.samples - 1);

    let jobs: Vec<(usize, usize)> = (0..config.classes)
        .flat_map(|c| (0..config.samples).map(move |s| (c, s)))
        .collect();
    let extract = |&(class, sample): &(usize, usize)| -> Result<Features> {
        let video = render_sample(&specs[class], sample, config.seed)?;
        Ok(Features {
            label: class,
            sample,
            motion: rgb_mhi_features(&video.frames)?,
            center: center_frame_features(&video.frames)?,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let features: Vec<Features> = pool.install(|| jobs.par_iter().map(extract).collect::<Result<Vec<_>>>())?;

    let split = |pick: fn(&Features) -> &Vec<f64>, train: bool| -> Vec<LabeledVector> {
        features
            .iter()
            .filter(|f| (f.sample < train_per_class) == train)
            .map(|f| LabeledVector {
                label: f.label,
                features: pick(f).clone(),
            })
            .collect()
    };
    let motion_train = split(|f| &f.motion, true);
    let motion_test = split(|f| &f.motion, false);
    let center_train = split(|f| &f.center, true);
    let center_test = split(|f| &f.center, false);

    let motion_model = NearestCentroid::fit_classes(&motion_train, config.classes)?;
    let center_model = NearestCentroid::fit_classes(&center_train, config.classes)?;

    let labels: Vec<usize> = motion_test.iter().map(|s| s.label).collect();
    let mut confusion = vec![vec![0usize; config.classes]; config.classes];
    for s in &motion_test {
        confusion[s.label][motion_model.predict(&s.features)] += 1;
    }
    let test_per_class = config.samples - train_per_class;
    let per_class_accuracy = (0..config.classes)
        .map(|c| confusion[c][c] as f64 / test_per_class as f64)
        .collect();

    let motion_logits = motion_test
        .iter()
        .map(|s| LogitVector::new(motion_model.logits(&s.features)))
        .collect::<Result<Vec<_>>>()?;
    let center_logits = center_test
        .iter()
        .map(|s| LogitVector::new(center_model.logits(&s.features)))
        .collect::<Result<Vec<_>>>()?;

    Ok(BenchReport {
        classes: config.classes,
        samples_per_class: config.samples,
        seed: config.seed,
        train_per_class,
        test_per_class,
        trajectories: specs.iter().map(|s| s.trajectory).collect(),
        accuracy: nearest_centroid_eval(&motion_train, &motion_test)?,
        per_class_accuracy,
        confusion,
        center_frame_accuracy: nearest_centroid_eval(&center_train, &center_test)?,
        fusion: fusion_bench(&motion_logits, &center_logits, &labels, &bench_weight_grid())?,
    })
}

/// Total RGB-MHI accumulation of a video, summed over all channels.
pub fn rgb_mhi_mass(frames: &[Frame]) -> Result<f64> {
    Ok(compute_rgb_mhi(FrameStream::from_frames(frames.to_vec())?)?.total_mass())
}

/// Mass of a single-channel motion history, for comparison with [`rgb_mhi_mass`].
pub fn mhi_mass(mhi: &MotionHistoryImage) -> f64 {
    mhi.total_mass()
}
