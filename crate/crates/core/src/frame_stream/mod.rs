//! Ordered, lazily decoded video frames.
//!
//! A [`FrameStream`] is opened from a manifest (one frame path per line) or
//! from a directory of `.pgm`/`.ppm` files. Opening reads only the headers to
//! validate that every frame shares the same geometry; pixel data is decoded
//! one frame at a time as the stream is consumed.

pub mod netpbm;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::preprocess::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorMode {
    Gray8,
    Rgb8,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Gray8 => 1,
            ColorMode::Rgb8 => 3,
        }
    }
}

/// One decoded frame. `index` is the 1-based position in its stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    index: usize,
    width: usize,
    height: usize,
    mode: ColorMode,
    pixels: Vec<u8>,
}

impl Frame {
    /// Wraps a row-major, channel-interleaved buffer. The index defaults to 1.
    pub fn new(width: usize, height: usize, mode: ColorMode, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!("zero-sized frame {width}x{height}")));
        }
        let expected = width * height * mode.channels();
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} {mode:?} frame needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            index: 1,
            width,
            height,
            mode,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, mode: ColorMode, value: u8) -> Result<Self> {
        Self::new(width, height, mode, vec![value; width * height * mode.channels()])
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mode(&self) -> ColorMode {
        self.mode
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn same_geometry(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.mode == other.mode
    }
}

/// BT.601 luma, `0.299 R + 0.587 G + 0.114 B`, rounded half-up.
///
/// Evaluated in integer thousandths so the rounding is exact. Gray frames are
/// returned unchanged.
pub fn to_grayscale(frame: Frame) -> Frame {
    if frame.mode == ColorMode::Gray8 {
        return frame;
    }
    let pixels = frame
        .pixels
        .chunks_exact(3)
        .map(|rgb| {
            let y = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
            ((y + 500) / 1000) as u8
        })
        .collect();
    Frame {
        index: frame.index,
        width: frame.width,
        height: frame.height,
        mode: ColorMode::Gray8,
        pixels,
    }
}

/// Mirrors a frame left to right.
pub fn hflip(frame: &Frame) -> Frame {
    let ch = frame.mode.channels();
    let row_len = frame.width * ch;
    let mut pixels = Vec::with_capacity(frame.pixels.len());
    for row in frame.pixels.chunks_exact(row_len) {
        for px in row.chunks_exact(ch).rev() {
            pixels.extend_from_slice(px);
        }
    }
    Frame {
        index: frame.index,
        width: frame.width,
        height: frame.height,
        mode: frame.mode,
        pixels,
    }
}

enum Source {
    Files(Vec<PathBuf>),
    Memory(std::vec::IntoIter<Frame>),
}

/// Single-consumer iterator over the frames of one video.
///
/// Yields `Result<Frame>` because decoding happens lazily; a file that changed
/// or was truncated after the stream was opened surfaces as an error item.
pub struct FrameStream {
    width: usize,
    height: usize,
    mode: ColorMode,
    frame_count: usize,
    source: Source,
    position: usize,
    bbox: Option<BoundingBox>,
}

impl std::fmt::Debug for FrameStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameStream")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("mode", &self.mode)
            .field("frame_count", &self.frame_count)
            .field("position", &self.position)
            .field("bbox", &self.bbox)
            .finish_non_exhaustive()
    }
}

impl FrameStream {
    /// Opens the frames listed in a manifest file.
    ///
    /// Paths are resolved relative to the manifest's directory. The last
    /// non-empty line may be `bbox x y w h`.
    pub fn open_manifest(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io_at(manifest_path, e))?;
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        let (paths, bbox) = parse_manifest(&text, base)?;
        let mut stream = Self::from_paths(paths)?;
        stream.bbox = bbox;
        Ok(stream)
    }

    /// Opens every `.pgm`/`.ppm` file in a directory, ordered by byte-wise
    /// comparison of file names (so `f10.pgm` sorts before `f2.pgm`).
    pub fn open_directory(dir_path: impl AsRef<Path>) -> Result<Self> {
        let dir_path = dir_path.as_ref();
        let entries = std::fs::read_dir(dir_path).map_err(|e| Error::io_at(dir_path, e))?;
        let mut paths = Vec::new();
        for entry in entries {
            let entry = entry?;
            let path = entry.path();
            if path.is_file() && is_frame_file(&path) {
                paths.push(path);
            }
        }
        paths.sort_by(|a, b| {
            let a = a.file_name().unwrap_or_default().as_encoded_bytes();
            let b = b.file_name().unwrap_or_default().as_encoded_bytes();
            a.cmp(b)
        });
        Self::from_paths(paths)
    }

    /// Opens a directory or a manifest, depending on what `path` points to.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            Self::open_directory(path)
        } else {
            Self::open_manifest(path)
        }
    }

    /// Validates headers of the given files, in order, without decoding pixels.
    pub fn from_paths(paths: Vec<PathBuf>) -> Result<Self> {
        let first = paths.first().ok_or(Error::EmptyStream)?;
        let head = netpbm::read_header(first)?;
        for path in &paths[1..] {
            let h = netpbm::read_header(path)?;
            if (h.width, h.height, h.mode) != (head.width, head.height, head.mode) {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {}x{} {:?}, expected {}x{} {:?}",
                    path.display(),
                    h.width,
                    h.height,
                    h.mode,
                    head.width,
                    head.height,
                    head.mode
                )));
            }
        }
        Ok(Self {
            width: head.width,
            height: head.height,
            mode: head.mode,
            frame_count: paths.len(),
            source: Source::Files(paths),
            position: 0,
            bbox: None,
        })
    }

    /// An in-memory stream. Frames are re-indexed 1..=N.
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptyStream)?;
        let (width, height, mode) = (first.width, first.height, first.mode);
        if let Some(bad) = frames.iter().find(|f| !f.same_geometry(first)) {
            return Err(Error::DimensionMismatch(format!(
                "frame {}x{} {:?} in a {width}x{height} {mode:?} stream",
                bad.width, bad.height, bad.mode
            )));
        }
        Ok(Self {
            width,
            height,
            mode,
            frame_count: frames.len(),
            source: Source::Memory(frames.into_iter()),
            position: 0,
            bbox: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn color_mode(&self) -> ColorMode {
        self.mode
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    /// Person box supplied by the manifest, if any.
    pub fn bbox(&self) -> Option<BoundingBox> {
        self.bbox
    }

    pub fn with_bbox(mut self, bbox: Option<BoundingBox>) -> Self {
        self.bbox = bbox;
        self
    }

    /// Frame files backing this stream, if it is disk-based.
    pub fn locators(&self) -> Option<&[PathBuf]> {
        match &self.source {
            Source::Files(paths) => Some(paths),
            Source::Memory(_) => None,
        }
    }
}

impl Iterator for FrameStream {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        let frame = match &mut self.source {
            Source::Files(paths) => {
                let path = paths.get(self.position)?;
                netpbm::read_frame(path).and_then(|f| {
                    if (f.width, f.height, f.mode) != (self.width, self.height, self.mode) {
                        Err(Error::DimensionMismatch(format!(
                            "{} changed geometry after the stream was opened",
                            path.display()
                        )))
                    } else {
                        Ok(f)
                    }
                })
            }
            Source::Memory(frames) => Ok(frames.next()?),
        };
        self.position += 1;
        Some(frame.map(|f| f.with_index(self.position)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.frame_count - self.position.min(self.frame_count);
        (left, Some(left))
    }
}

fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm"))
}

fn parse_manifest(text: &str, base: &Path) -> Result<(Vec<PathBuf>, Option<BoundingBox>)> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut paths = Vec::with_capacity(lines.len());
    let mut bbox = None;
    for (i, line) in lines.iter().enumerate() {
        if let Some(rest) = line.strip_prefix("bbox ") {
            if i + 1 != lines.len() {
                return Err(Error::Malformed("bbox line must be the last manifest line".into()));
            }
            bbox = Some(parse_bbox_fields(rest.split_whitespace())?);
        } else {
            paths.push(base.join(line));
        }
    }
    Ok((paths, bbox))
}

pub(crate) fn parse_bbox_fields<'a>(fields: impl Iterator<Item = &'a str>) -> Result<BoundingBox> {
    let values = fields
        .map(|f| f.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Malformed(format!("bbox: {e}")))?;
    let [x, y, w, h] = values[..] else {
        return Err(Error::Malformed(format!("bbox needs 4 integers, got {}", values.len())));
    };
    if w <= 0 || h <= 0 {
        return Err(Error::InvalidBox(format!("non-positive extent {w}x{h}")));
    }
    Ok(BoundingBox::new(x, y, w as usize, h as usize))
}
