//! Weighted frame-difference motion history.
//!
//! For a stream of `N` grayscale frames `I_1..I_N` the accumulator is
//!
//! ```text
//! M(i,j) = sum_{t=2..N} |I_{t-1}(i,j) - I_t(i,j)| * t / N
//! ```
//!
//! so later motion contributes more and shows up brighter. Each step's term is
//! evaluated as `(d * t) / N` in `f64` (one correctly rounded division per
//! term) and terms are added in ascending `t`. That order is part of the
//! contract: any chunked or parallel variant must reproduce it bit for bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame_stream::{to_grayscale, ColorMode, Frame, FrameStream};

/// How each frame difference is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `W = t / N`.
    #[default]
    Recency,
    /// `W = 1`. Used to make temporal-symmetry properties exact.
    Uniform,
}

impl Weighting {
    /// The contribution of an absolute difference `diff` at step `t` of `n`.
    #[inline]
    pub fn term(self, diff: u8, t: usize, n: usize) -> f64 {
        match self {
            Weighting::Recency => (diff as u64 * t as u64) as f64 / n as f64,
            Weighting::Uniform => diff as f64,
        }
    }

    fn table(self, t: usize, n: usize) -> [f64; 256] {
        let mut lut = [0.0; 256];
        for (d, slot) in lut.iter_mut().enumerate() {
            *slot = self.term(d as u8, t, n);
        }
        lut
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionHistoryImage {
    width: usize,
    height: usize,
    accum: Vec<f64>,
    source_frame_count: usize,
}

impl MotionHistoryImage {
    pub fn from_parts(width: usize, height: usize, accum: Vec<f64>, source_frame_count: usize) -> Result<Self> {
        if accum.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "accumulator of {} values for a {width}x{height} image",
                accum.len()
            )));
        }
        Ok(Self {
            width,
            height,
            accum,
            source_frame_count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn source_frame_count(&self) -> usize {
        self.source_frame_count
    }

    /// Row-major accumulator values.
    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.accum[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.accum.iter().copied().fold(0.0, f64::max)
    }

    /// Sum over all pixels.
    pub fn total_mass(&self) -> f64 {
        self.accum.iter().sum()
    }

    /// Largest value any pixel can reach for 8-bit input of this length.
    pub fn upper_bound(frame_count: usize, weighting: Weighting) -> f64 {
        (2..=frame_count).map(|t| weighting.term(255, t, frame_count)).sum()
    }
}

/// Streaming accumulator: feed frames in order with [`push`](Self::push).
///
/// Holds the previous frame's samples and the accumulator, nothing else.
#[derive(Debug)]
pub struct MhiAccumulator {
    width: usize,
    height: usize,
    frame_count: usize,
    weighting: Weighting,
    seen: usize,
    prev: Option<Vec<u8>>,
    accum: Vec<f64>,
}

impl MhiAccumulator {
    pub fn new(width: usize, height: usize, frame_count: usize, weighting: Weighting) -> Result<Self> {
        if frame_count < 2 {
            return Err(Error::InsufficientFrames {
                needed: 2,
                got: frame_count,
            });
        }
        Ok(Self {
            width,
            height,
            frame_count,
            weighting,
            seen: 0,
            prev: None,
            accum: vec![0.0; width * height],
        })
    }

    /// Adds the next frame. Color frames are converted to luma first.
    pub fn push(&mut self, frame: Frame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} frame pushed into a {}x{} accumulator",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        if self.seen == self.frame_count {
            return Err(Error::DimensionMismatch(format!(
                "more than the declared {} frames",
                self.frame_count
            )));
        }
        self.seen += 1;
        let current = to_grayscale(frame).into_pixels();
        if let Some(prev) = &self.prev {
            let lut = self.weighting.table(self.seen, self.frame_count);
            for ((acc, &a), &b) in self.accum.iter_mut().zip(prev).zip(&current) {
                *acc += lut[a.abs_diff(b) as usize];
            }
        }
        self.prev = Some(current);
        Ok(())
    }

    pub fn frames_seen(&self) -> usize {
        self.seen
    }

    pub fn finish(self) -> Result<MotionHistoryImage> {
        if self.seen != self.frame_count {
            return Err(Error::InsufficientFrames {
                needed: self.frame_count,
                got: self.seen,
            });
        }
        MotionHistoryImage::from_parts(self.width, self.height, self.accum, self.frame_count)
    }
}

/// Motion history of a whole stream with `W = t / N`, in one pass.
pub fn compute_mhi(stream: FrameStream) -> Result<MotionHistoryImage> {
    compute_mhi_with(stream, Weighting::Recency)
}

pub fn compute_mhi_with(stream: FrameStream, weighting: Weighting) -> Result<MotionHistoryImage> {
    let mut acc = MhiAccumulator::new(stream.width(), stream.height(), stream.frame_count(), weighting)?;
    for frame in stream {
        acc.push(frame?)?;
    }
    acc.finish()
}

/// The per-pixel contribution `|prev - cur| * W(t)` of a single step.
pub fn step_contribution(prev: &Frame, cur: &Frame, t: usize, n: usize, weighting: Weighting) -> Result<Vec<f64>> {
    if !prev.same_geometry(cur) || prev.mode() != ColorMode::Gray8 {
        return Err(Error::DimensionMismatch(
            "step contribution needs two gray frames of equal size".into(),
        ));
    }
    Ok(prev
        .pixels()
        .iter()
        .zip(cur.pixels())
        .map(|(&a, &b)| weighting.term(a.abs_diff(b), t, n))
        .collect())
}

/// Row-parallel variant over frames already in memory.
///
/// Rows are split across threads; within a pixel the terms are still added in
/// ascending `t`, so the result is bit-identical to [`compute_mhi_with`].
pub fn compute_mhi_parallel(frames: &[Frame], weighting: Weighting) -> Result<MotionHistoryImage> {
    let n = frames.len();
    if n < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: n });
    }
    let first = &frames[0];
    if let Some(bad) = frames
        .iter()
        .find(|f| f.width() != first.width() || f.height() != first.height())
    {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} in a {}x{} video",
            bad.width(),
            bad.height(),
            first.width(),
            first.height()
        )));
    }
    let (width, height) = (first.width(), first.height());
    let gray: Vec<Frame> = frames.iter().cloned().map(to_grayscale).collect();
    let tables: Vec<[f64; 256]> = (2..=n).map(|t| weighting.table(t, n)).collect();

    let mut accum = vec![0.0; width * height];
    accum.par_chunks_mut(width).enumerate().for_each(|(row, out)| {
        let span = row * width..(row + 1) * width;
        for (step, lut) in tables.iter().enumerate() {
            let prev = &gray[step].pixels()[span.clone()];
            let cur = &gray[step + 1].pixels()[span.clone()];
            for ((acc, &a), &b) in out.iter_mut().zip(prev).zip(cur) {
                *acc += lut[a.abs_diff(b) as usize];
            }
        }
    });
    MotionHistoryImage::from_parts(width, height, accum, n)
}

/// Scales the accumulator so its maximum maps to 255, rounding half-up.
/// A motionless image quantizes to all zeros.
pub fn quantize_mhi(mhi: &MotionHistoryImage) -> Frame {
    let max = mhi.max();
    let pixels = mhi.accum.iter().map(|&a| quantize_value(a, max)).collect();
    Frame::new(mhi.width, mhi.height, ColorMode::Gray8, pixels).expect("accumulator matches its dimensions")
}

pub(crate) fn quantize_value(value: f64, max: f64) -> u8 {
    if max > 0.0 {
        (255.0 * value / max + 0.5).floor().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_stream::hflip;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, pixels: Vec<u8>) -> Frame {
        Frame::new(w, h, ColorMode::Gray8, pixels).unwrap()
    }

    fn mhi_of(frames: Vec<Frame>) -> MotionHistoryImage {
        compute_mhi(FrameStream::from_frames(frames).unwrap()).unwrap()
    }

    #[test]
    fn two_frames_full_weight() {
        let m = mhi_of(vec![gray(3, 2, vec![0; 6]), gray(3, 2, vec![100; 6])]);
        assert!(m.accum().iter().all(|&a| a == 100.0));
        assert_eq!(m.source_frame_count(), 2);
    }

    #[test]
    fn static_video_is_zero() {
        for n in 2..8 {
            let m = mhi_of(vec![gray(4, 4, vec![77; 16]); n]);
            assert!(m.accum().iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn early_versus_late_change() {
        // pixel 0 changes between frames 1 and 2, pixel 1 between frames 2 and 3
        let frames = vec![
            gray(2, 1, vec![0, 0]),
            gray(2, 1, vec![60, 0]),
            gray(2, 1, vec![60, 60]),
        ];
        let m = mhi_of(frames);
        assert_eq!(m.accum(), &[40.0, 60.0]);
    }

    #[test]
    fn single_frame_is_an_error() {
        let stream = FrameStream::from_frames(vec![gray(2, 2, vec![0; 4])]).unwrap();
        assert!(matches!(
            compute_mhi(stream),
            Err(Error::InsufficientFrames { got: 1, .. })
        ));
    }

    #[test]
    fn color_frames_use_luma() {
        let a = Frame::new(1, 1, ColorMode::Rgb8, vec![0, 0, 0]).unwrap();
        let b = Frame::new(1, 1, ColorMode::Rgb8, vec![255, 0, 0]).unwrap();
        assert_eq!(mhi_of(vec![a, b]).accum(), &[76.0]);
    }

    #[test]
    fn accumulator_rejects_extra_frames() {
        let mut acc = MhiAccumulator::new(1, 1, 2, Weighting::Recency).unwrap();
        acc.push(gray(1, 1, vec![0])).unwrap();
        acc.push(gray(1, 1, vec![0])).unwrap();
        assert!(acc.push(gray(1, 1, vec![0])).is_err());
    }

    #[test]
    fn quantize_examples() {
        let zero = MotionHistoryImage::from_parts(2, 1, vec![0.0, 0.0], 2).unwrap();
        assert_eq!(quantize_mhi(&zero).pixels(), &[0, 0]);
        let single = MotionHistoryImage::from_parts(3, 1, vec![0.0, 100.0, 0.0], 2).unwrap();
        assert_eq!(quantize_mhi(&single).pixels(), &[0, 255, 0]);
        let pair = MotionHistoryImage::from_parts(2, 1, vec![50.0, 100.0], 2).unwrap();
        assert_eq!(quantize_mhi(&pair).pixels(), &[128, 255]);
    }

    fn video(w: usize, h: usize, n: usize, seed: u64, max: u8) -> Vec<Frame> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| gray(w, h, (0..w * h).map(|_| rng.gen_range(0..=max)).collect()))
            .collect()
    }

    proptest! {
        #[test]
        fn bounded_and_non_negative(n in 2usize..20, seed: u64) {
            let m = mhi_of(video(5, 4, n, seed, 255));
            let bound = MotionHistoryImage::upper_bound(n, Weighting::Recency);
            prop_assert!(m.accum().iter().all(|&a| (0.0..=bound).contains(&a)));
        }

        #[test]
        fn flip_equivariant(n in 2usize..12, seed: u64) {
            let frames = video(7, 3, n, seed, 255);
            let flipped: Vec<Frame> = frames.iter().map(hflip).collect();
            let direct = mhi_of(flipped);
            let m = mhi_of(frames);
            for y in 0..3 {
                for x in 0..7 {
                    prop_assert_eq!(direct.get(x, y).to_bits(), m.get(6 - x, y).to_bits());
                }
            }
        }

        #[test]
        fn linear_in_intensity(log_n in 1u32..6, k in 0u8..4, seed: u64) {
            // power-of-two lengths keep every term a short dyadic rational,
            // so the scaling is exact
            let n = 1usize << log_n;
            let frames = video(4, 4, n, seed, 63);
            let scaled: Vec<Frame> = frames
                .iter()
                .map(|f| gray(4, 4, f.pixels().iter().map(|&p| p * k).collect()))
                .collect();
            let base = mhi_of(frames);
            let times_k = mhi_of(scaled);
            for (a, b) in base.accum().iter().zip(times_k.accum()) {
                prop_assert_eq!(a * k as f64, *b);
            }
        }

        #[test]
        fn linear_in_intensity_general_length(n in 2usize..30, k in 0u8..4, seed: u64) {
            let frames = video(4, 4, n, seed, 63);
            let scaled: Vec<Frame> = frames
                .iter()
                .map(|f| gray(4, 4, f.pixels().iter().map(|&p| p * k).collect()))
                .collect();
            let base = mhi_of(frames);
            let times_k = mhi_of(scaled);
            for (a, b) in base.accum().iter().zip(times_k.accum()) {
                prop_assert!((a * k as f64 - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn step_contributions_sum_to_fold(n in 2usize..16, seed: u64) {
            let frames = video(6, 5, n, seed, 255);
            let mut total = vec![0.0; 30];
            for t in 2..=n {
                let c = step_contribution(&frames[t - 2], &frames[t - 1], t, n, Weighting::Recency).unwrap();
                for (acc, v) in total.iter_mut().zip(c) {
                    *acc += v;
                }
            }
            let parallel = compute_mhi_parallel(&frames, Weighting::Recency).unwrap();
            let m = mhi_of(frames);
            prop_assert_eq!(m.accum(), &total[..]);
            prop_assert_eq!(parallel.accum(), m.accum());
        }
    }
}
