//! Dense row-major tensors and the `MHT1` file format.
//!
//! Layout (little-endian):
//! - magic: `MHT1`
//! - rank: u32
//! - dims: rank * u32
//! - data: f32 * product(dims), row-major
//!
//! Values are held as `f64` in memory and narrowed to `f32` on write.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MHT1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl FeatureVolume {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimensionMismatch(format!("invalid dims {dims:?}")));
        }
        let count: usize = dims.iter().product();
        if values.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {count} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!(
                "value {} at flat index {pos}",
                values[pos]
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let count = dims.iter().product();
        Self::new(dims, vec![0.0; count])
    }

    pub fn from_fn(dims: Vec<usize>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        let count = dims.iter().product();
        Self::new(dims, (0..count).map(f).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn at(&self, index: &[usize]) -> f64 {
        self.values[self.offset(index)]
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.dims.clone(), self.values.iter().map(|v| v * k).collect())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::DimensionMismatch(format!("dim {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::UnsupportedFormat(format!("tensor magic {magic:?} is not MHT1")));
        }
        let rank = read_u32(r)? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Malformed(format!("tensor rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| read_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Malformed(format!("tensor dims {dims:?} overflow")))?;
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes).map_err(truncated)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(dims, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io_at(path, e))?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?);
        Self::read_from(&mut file)
    }
}

/// Reads `count` tensors stored back to back in one file.
pub fn load_many(path: impl AsRef<Path>, count: usize) -> Result<Vec<FeatureVolume>> {
    let path = path.as_ref();
    let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io_at(path, e))?);
    let tensors = (0..count)
        .map(|_| FeatureVolume::read_from(&mut file))
        .collect::<Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if file.read(&mut rest)? != 0 {
        return Err(Error::Malformed(format!("trailing bytes after {count} tensors")));
    }
    Ok(tensors)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Malformed("truncated tensor file".into())
    } else {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_bytes() {
        let t = FeatureVolume::new(vec![2, 1], vec![1.0, -2.5]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let mut expected = b"MHT1".to_vec();
        expected.extend(2u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.5f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            FeatureVolume::read_from(&mut &b"MHT2\x01\0\0\0"[..]),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            FeatureVolume::read_from(&mut &b"MHT1\x01\0\0\0\x02\0\0\0\0\0"[..]),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            FeatureVolume::new(vec![1], vec![f64::NAN]),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(matches!(
            FeatureVolume::new(vec![2, 0], vec![]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn offsets_are_row_major() {
        let t = FeatureVolume::from_fn(vec![2, 3, 4], |i| i as f64).unwrap();
        assert_eq!(t.at(&[1, 2, 3]), 23.0);
        assert_eq!(t.at(&[0, 1, 0]), 4.0);
    }

    proptest! {
        #[test]
        fn f32_values_survive_a_file_round_trip(
            dims in proptest::collection::vec(1usize..5, 1..5),
            seed in any::<u32>(),
        ) {
            let t = FeatureVolume::from_fn(dims, |i| ((i as u32).wrapping_mul(seed) as f32 / 1e6) as f64).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            t.write_to(&mut buf).unwrap();
            let mut r = &buf[..];
            prop_assert_eq!(&FeatureVolume::read_from(&mut r).unwrap(), &t);
            prop_assert_eq!(&FeatureVolume::read_from(&mut r).unwrap(), &t);
            prop_assert!(r.is_empty());
        }
    }
}
