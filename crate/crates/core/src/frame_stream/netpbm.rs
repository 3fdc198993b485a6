//! Binary PGM (`P5`) and PPM (`P6`) with `maxval` 255.
//!
//! Headers may carry `#` comments between tokens. Anything else in the
//! netpbm family (ASCII variants, PBM, PAM, 16-bit samples) is rejected
//! with `UnsupportedFormat`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColorMode, Frame};
use crate::error::{Error, Result};

/// Largest header we are willing to scan when only the header is needed.
const HEADER_PROBE_BYTES: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: usize,
    pub height: usize,
    pub mode: ColorMode,
    /// Byte offset of the first sample.
    pub data_offset: usize,
}

impl Header {
    pub fn data_len(&self) -> usize {
        self.width * self.height * self.mode.channels()
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::UnsupportedFormat("missing netpbm magic".into()));
    }
    let mode = match bytes[1] {
        b'5' => ColorMode::Gray8,
        b'6' => ColorMode::Rgb8,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "magic P{} is not P5 or P6",
                other as char
            )))
        }
    };

    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Malformed("truncated netpbm header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Malformed("expected a number in netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed("header number out of range".into()))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Malformed("missing separator after maxval".into())),
    }

    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Malformed(format!("zero-sized image {width}x{height}")));
    }
    Ok(Header {
        width,
        height,
        mode,
        data_offset: pos,
    })
}

/// Reads and parses only the header of a file.
pub fn read_header(path: &Path) -> Result<Header> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut prefix = Vec::with_capacity(64);
    file.take(HEADER_PROBE_BYTES).read_to_end(&mut prefix)?;
    parse_header(&prefix)
}

/// Decodes a complete in-memory file. The sample buffer reuses `bytes`'
/// allocation.
pub fn decode(mut bytes: Vec<u8>) -> Result<Frame> {
    let header = parse_header(&bytes)?;
    let end = header.data_offset + header.data_len();
    if bytes.len() < end {
        return Err(Error::Malformed(format!(
            "expected {} sample bytes, found {}",
            header.data_len(),
            bytes.len().saturating_sub(header.data_offset)
        )));
    }
    bytes.truncate(end);
    bytes.drain(..header.data_offset);
    Frame::new(header.width, header.height, header.mode, bytes)
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io_at(path, e))?;
    decode(bytes)
}

pub fn encode(frame: &Frame) -> Vec<u8> {
    let magic = match frame.mode() {
        ColorMode::Gray8 => "P5",
        ColorMode::Rgb8 => "P6",
    };
    let header = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.pixels());
    out
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io_at(path, e))?;
    file.write_all(&encode(frame))?;
    Ok(())
}
