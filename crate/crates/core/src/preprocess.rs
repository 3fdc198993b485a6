//! Clip preparation: fixed-length temporal sampling, square person crops and
//! the six-way augmentation (three crop placements, each with and without a
//! horizontal flip).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame_stream::{hflip, Frame, FrameStream};

pub const DEFAULT_TARGET_FRAMES: usize = 32;
pub const DEFAULT_MAX_SKIP: usize = 10;
pub const DEFAULT_SHIFT_LIMIT: usize = 16;
pub const DEFAULT_RESIZE: usize = 224;

/// Axis-aligned box, top-left origin, in pixels. May hang off the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x: i64, y: i64, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    /// Parses `x,y,w,h`.
    pub fn parse(text: &str) -> Result<Self> {
        crate::frame_stream::parse_bbox_fields(text.split(','))
    }

    pub fn is_square(&self) -> bool {
        self.w == self.h
    }

    fn validate(&self, frame_width: usize, frame_height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidBox(format!("empty box {self:?}")));
        }
        let intersects = self.x < frame_width as i64
            && self.y < frame_height as i64
            && self.x + self.w as i64 > 0
            && self.y + self.h as i64 > 0;
        if !intersects {
            return Err(Error::InvalidBox(format!(
                "{self:?} does not intersect the {frame_width}x{frame_height} frame"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub source_count: usize,
    pub skip_head: usize,
    pub skip_tail: usize,
    /// 1-based source positions, non-decreasing.
    pub indices: Vec<usize>,
}

/// Frames trimmed from each end: `min(max_skip, max(0, (F - target) / 4))`.
pub fn skip_count(frame_count: usize, target: usize, max_skip: usize) -> usize {
    (frame_count.saturating_sub(target) / 4).min(max_skip)
}

/// Picks exactly `target` frames spread uniformly over the middle of the clip.
///
/// Index `k` (1-based) is `1 + skip + round((k - 1) (R - 1) / (target - 1))`
/// with `R = F - 2 skip`, rounding half up. Short clips repeat frames.
pub fn plan_sampling(frame_count: usize, target: usize, max_skip: usize) -> Result<SamplingPlan> {
    if frame_count == 0 {
        return Err(Error::EmptyStream);
    }
    if target == 0 {
        return Err(Error::InvalidConfig("target frame count must be positive".into()));
    }
    let skip = skip_count(frame_count, target, max_skip);
    let remaining = frame_count - 2 * skip;
    let indices = (0..target)
        .map(|k| {
            let offset = if target == 1 {
                0
            } else {
                let den = 2 * (target - 1);
                (2 * k * (remaining - 1) + (target - 1)) / den
            };
            1 + skip + offset
        })
        .collect();
    Ok(SamplingPlan {
        source_count: frame_count,
        skip_head: skip,
        skip_tail: skip,
        indices,
    })
}

/// Collects the planned frames in one pass over the stream.
pub fn sample_frames(stream: FrameStream, plan: &SamplingPlan) -> Result<Vec<Frame>> {
    if stream.frame_count() != plan.source_count {
        return Err(Error::DimensionMismatch(format!(
            "plan for {} frames applied to a {}-frame stream",
            plan.source_count,
            stream.frame_count()
        )));
    }
    let mut out = Vec::with_capacity(plan.indices.len());
    let mut wanted = plan.indices.iter().peekable();
    for frame in stream {
        let frame = frame?;
        while wanted.next_if(|&&i| i == frame.index()).is_some() {
            out.push(frame.clone().with_index(out.len() + 1));
        }
        if wanted.peek().is_none() {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expansion {
    /// Pad both sides equally; an odd pixel goes right (or down).
    Center,
    /// Pad on the left (or top) first.
    LeftFirst,
    /// Pad on the right (or bottom) first.
    RightFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AugmentationVariant {
    pub expansion: Expansion,
    /// Pixels, positive moves the box down.
    pub vertical_shift: i64,
    pub hflip: bool,
}

impl AugmentationVariant {
    pub fn centered() -> Self {
        Self {
            expansion: Expansion::Center,
            vertical_shift: 0,
            hflip: false,
        }
    }

    /// Directory-style label: `c`/`l`/`r` followed by `0`/`1` for the flip.
    pub fn label(&self) -> String {
        let e = match self.expansion {
            Expansion::Center => 'c',
            Expansion::LeftFirst => 'l',
            Expansion::RightFirst => 'r',
        };
        format!("{e}{}", u8::from(self.hflip))
    }
}

/// Grows a box into a square of side `max(w, h)` and fits it in the frame.
///
/// The short side is padded according to the variant, the box is then moved
/// by the vertical shift and finally translated (never shrunk) back inside the
/// frame.
pub fn square_crop(
    frame_width: usize,
    frame_height: usize,
    bbox: BoundingBox,
    variant: &AugmentationVariant,
) -> Result<BoundingBox> {
    bbox.validate(frame_width, frame_height)?;
    let side = bbox.w.max(bbox.h);
    if side > frame_width.min(frame_height) {
        return Err(Error::BoxTooLarge {
            side,
            frame_width,
            frame_height,
        });
    }

    let pad = |start: i64, short: usize| -> i64 {
        let extra = (side - short) as i64;
        match variant.expansion {
            Expansion::Center => start - extra / 2,
            Expansion::LeftFirst => start - extra,
            Expansion::RightFirst => start,
        }
    };
    let (mut x, mut y) = if bbox.h >= bbox.w {
        (pad(bbox.x, bbox.w), bbox.y)
    } else {
        (bbox.x, pad(bbox.y, bbox.h))
    };
    y += variant.vertical_shift;

    x = x.clamp(0, (frame_width - side) as i64);
    y = y.clamp(0, (frame_height - side) as i64);
    Ok(BoundingBox::new(x, y, side, side))
}

/// Copies the pixels inside `bbox`, which must lie within the frame.
pub fn crop(frame: &Frame, bbox: BoundingBox) -> Result<Frame> {
    let inside = bbox.x >= 0
        && bbox.y >= 0
        && bbox.x as usize + bbox.w <= frame.width()
        && bbox.y as usize + bbox.h <= frame.height();
    if !inside || bbox.w == 0 || bbox.h == 0 {
        return Err(Error::InvalidBox(format!(
            "{bbox:?} is not inside the {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    let ch = frame.mode().channels();
    let stride = frame.width() * ch;
    let (x, y) = (bbox.x as usize, bbox.y as usize);
    let mut pixels = Vec::with_capacity(bbox.w * bbox.h * ch);
    for row in y..y + bbox.h {
        let start = row * stride + x * ch;
        pixels.extend_from_slice(&frame.pixels()[start..start + bbox.w * ch]);
    }
    Ok(Frame::new(bbox.w, bbox.h, frame.mode(), pixels)?.with_index(frame.index()))
}

/// Source coordinate of an output sample, half-pixel centers, as an integer
/// cell plus a fraction `frac / den`. Exact rational arithmetic keeps the
/// kernel mirror-symmetric.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, u64, u64) {
    let den = 2 * dst_len as i64;
    let num = (2 * dst as i64 + 1) * src_len as i64 - dst_len as i64;
    let max = den * (src_len as i64 - 1);
    let num = num.clamp(0, max);
    let i0 = (num / den) as usize;
    let frac = (num % den) as u64;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, frac, den as u64)
}

/// Bilinear resize with half-pixel centers and edge clamping, rounded half-up.
pub fn resize_bilinear(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig(format!("resize target {width}x{height}")));
    }
    if (frame.width(), frame.height()) == (width, height) {
        return Ok(frame.clone());
    }
    let ch = frame.mode().channels();
    let src = frame.pixels();
    let stride = frame.width() * ch;
    let cols: Vec<_> = (0..width).map(|x| sample_axis(x, frame.width(), width)).collect();
    let mut pixels = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let (y0, y1, fy, dy) = sample_axis(y, frame.height(), height);
        for &(x0, x1, fx, dx) in &cols {
            let den = dx * dy;
            for c in 0..ch {
                let p = |yy: usize, xx: usize| src[yy * stride + xx * ch + c] as u64;
                let sum = (dx - fx) * (dy - fy) * p(y0, x0)
                    + fx * (dy - fy) * p(y0, x1)
                    + (dx - fx) * fy * p(y1, x0)
                    + fx * fy * p(y1, x1);
                pixels.push(((2 * sum + den) / (2 * den)) as u8);
            }
        }
    }
    Ok(Frame::new(width, height, frame.mode(), pixels)?.with_index(frame.index()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    /// Largest absolute vertical shift, in source pixels.
    pub shift_limit: usize,
    /// Side of the square output frames.
    pub resize: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift_limit: DEFAULT_SHIFT_LIMIT,
            resize: DEFAULT_RESIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedVideo {
    pub variant: AugmentationVariant,
    pub crop: BoundingBox,
    pub frames: Vec<Frame>,
}

/// The six variants, in output order `c0 l0 r0 c1 l1 r1`. The two random
/// vertical shifts are drawn from `seed` and shared by the flipped copies.
pub fn augmentation_variants(seed: u64, shift_limit: usize) -> [AugmentationVariant; 6] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = shift_limit as i64;
    let left_shift = rng.gen_range(-limit..=limit);
    let right_shift = rng.gen_range(-limit..=limit);
    let base = [
        (Expansion::Center, 0),
        (Expansion::LeftFirst, left_shift),
        (Expansion::RightFirst, right_shift),
    ];
    std::array::from_fn(|i| {
        let (expansion, vertical_shift) = base[i % 3];
        AugmentationVariant {
            expansion,
            vertical_shift,
            hflip: i >= 3,
        }
    })
}

/// Crops, resizes and optionally flips every frame for each of the six variants.
pub fn augment_set(
    video: &[Frame],
    bbox: BoundingBox,
    seed: u64,
    config: &AugmentConfig,
) -> Result<Vec<AugmentedVideo>> {
    let first = video.first().ok_or(Error::EmptyStream)?;
    let (fw, fh) = (first.width(), first.height());
    if let Some(bad) = video.iter().find(|f| !f.same_geometry(first)) {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} in a {fw}x{fh} video",
            bad.width(),
            bad.height()
        )));
    }
    augmentation_variants(seed, config.shift_limit)
        .into_iter()
        .map(|variant| {
            let crop_box = square_crop(fw, fh, bbox, &variant)?;
            let frames = video
                .iter()
                .map(|f| {
                    let out = resize_bilinear(&crop(f, crop_box)?, config.resize, config.resize)?;
                    Ok(if variant.hflip { hflip(&out) } else { out })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AugmentedVideo {
                variant,
                crop: crop_box,
                frames,
            })
        })
        .collect()
}
