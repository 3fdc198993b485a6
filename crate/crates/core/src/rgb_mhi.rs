//! Tri-temporal RGB motion history.
//!
//! The video is cut into three contiguous parts and each part gets its own
//! motion history with part-local weights `t_local / N_p`. The first part goes
//! to the blue channel, the middle to green and the last to red, so the hue of
//! a moving region tells when it moved.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::frame_stream::{ColorMode, Frame, FrameStream};
use crate::mhi::{quantize_value, MhiAccumulator, MotionHistoryImage, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    B = 0,
    G = 1,
    R = 2,
}

/// Splits `1..=n` into three contiguous parts whose sizes differ by at most
/// one, giving the leftover frames to the earliest parts.
pub fn split_thirds(n: usize) -> Result<[RangeInclusive<usize>; 3]> {
    if n < 6 {
        return Err(Error::InsufficientFrames { needed: 6, got: n });
    }
    let (base, rem) = (n / 3, n % 3);
    let mut start = 1;
    Ok(std::array::from_fn(|p| {
        let len = base + usize::from(p < rem);
        let range = start..=start + len - 1;
        start += len;
        range
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbMhiImage {
    width: usize,
    height: usize,
    /// Indexed by [`Channel`]: B, G, R.
    channels: [MotionHistoryImage; 3],
    part_bounds: [RangeInclusive<usize>; 3],
}

impl RgbMhiImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel(&self, c: Channel) -> &MotionHistoryImage {
        &self.channels[c as usize]
    }

    /// B, G, R in that order.
    pub fn channels(&self) -> &[MotionHistoryImage; 3] {
        &self.channels
    }

    pub fn part_bounds(&self) -> &[RangeInclusive<usize>; 3] {
        &self.part_bounds
    }

    pub fn max(&self) -> f64 {
        self.channels.iter().map(MotionHistoryImage::max).fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.channels.iter().map(MotionHistoryImage::total_mass).sum()
    }
}

pub fn compute_rgb_mhi(stream: FrameStream) -> Result<RgbMhiImage> {
    compute_rgb_mhi_with(stream, Weighting::Recency)
}

/// Builds all three channels in a single pass over the stream.
pub fn compute_rgb_mhi_with(stream: FrameStream, weighting: Weighting) -> Result<RgbMhiImage> {
    let (width, height) = (stream.width(), stream.height());
    let part_bounds = split_thirds(stream.frame_count())?;
    let mut accs = part_bounds
        .iter()
        .map(|r| MhiAccumulator::new(width, height, r.end() - r.start() + 1, weighting))
        .collect::<Result<Vec<_>>>()?;

    let mut part = 0;
    for frame in stream {
        let frame = frame?;
        while frame.index() > *part_bounds[part].end() {
            part += 1;
        }
        accs[part].push(frame)?;
    }

    let mut finished = accs.into_iter().map(MhiAccumulator::finish);
    let channels = [
        finished.next().expect("three parts")?,
        finished.next().expect("three parts")?,
        finished.next().expect("three parts")?,
    ];
    Ok(RgbMhiImage {
        width,
        height,
        channels,
        part_bounds,
    })
}

/// Quantizes all channels against one shared maximum and packs them as an
/// interleaved R, G, B frame.
pub fn quantize_rgb_mhi(img: &RgbMhiImage) -> Frame {
    let max = img.max();
    let [b, g, r] = &img.channels;
    let mut pixels = Vec::with_capacity(img.width * img.height * 3);
    for ((&r, &g), &b) in r.accum().iter().zip(g.accum()).zip(b.accum()) {
        pixels.extend([quantize_value(r, max), quantize_value(g, max), quantize_value(b, max)]);
    }
    Frame::new(img.width, img.height, ColorMode::Rgb8, pixels).expect("channels match image dimensions")
}
