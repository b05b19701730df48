//! BSSC cube and BSSL label files.
//!
//! Both formats are little-endian: a 4-byte magic, a `u32` version (1) and
//! `u32` dimensions, followed by the payload. Cubes carry `N` `f64`
//! wavelengths then `H*W*N` band-major `f32` values; label files carry
//! `H*W` `u16` labels.

use std::fs;
use std::path::Path;

use super::{HsiCube, LabelMap};
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 4] = b"BSSC";
pub const LABEL_MAGIC: &[u8; 4] = b"BSSL";
pub const FORMAT_VERSION: u32 = 1;

/// A cube read from disk. `normalized` is set when the stored values fell
/// outside `[0, 1]` and were min-max rescaled on ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCube {
    pub cube: HsiCube,
    pub normalized: bool,
}

pub fn encode_cube(cube: &HsiCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * cube.num_bands() + 4 * cube.values().len());
    out.extend_from_slice(CUBE_MAGIC);
    for v in [FORMAT_VERSION, cube.height() as u32, cube.width() as u32, cube.num_bands() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for w in cube.wavelengths() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for v in cube.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // HsiCube cannot hold non-finite values, but re-check before anything hits disk.
    if let Some(pos) = cube.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("refusing to save non-finite value at index {pos}")));
    }
    fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.offset..end];
                self.offset = end;
                Ok(slice)
            }
            None => Err(Error::Format {
                offset: self.offset as u64,
                message: format!(
                    "truncated while reading {what}: need {len} bytes, {} remain",
                    self.bytes.len() - self.offset
                ),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != magic {
            return Err(Error::Format {
                offset: 0,
                message: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(found),
                    String::from_utf8_lossy(magic)
                ),
            });
        }
        let at = self.offset as u64;
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                offset: at,
                message: format!("unsupported version {version}"),
            });
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(Error::Format {
                offset: self.offset as u64,
                message: format!("{} trailing bytes", self.bytes.len() - self.offset),
            });
        }
        Ok(())
    }

    fn count(&self, dims: &[u32], elem: usize) -> Result<usize> {
        dims.iter()
            .try_fold(elem, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| Error::Format {
                offset: self.offset as u64,
                message: format!("dimensions {dims:?} overflow"),
            })
    }
}

pub fn decode_cube(bytes: &[u8]) -> Result<LoadedCube> {
    let mut r = Reader { bytes, offset: 0 };
    r.header(CUBE_MAGIC)?;
    let (h, w, n) = (r.u32("height")?, r.u32("width")?, r.u32("band count")?);
    if h == 0 || w == 0 || n == 0 {
        return Err(Error::Format {
            offset: 8,
            message: format!("zero dimension in {h}x{w}x{n}"),
        });
    }
    let wl_bytes = r.take(r.count(&[n], 8)?, "wavelengths")?;
    let wavelengths: Vec<f64> = wl_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values_at = r.offset;
    let raw = r.take(r.count(&[h, w, n], 4)?, "values")?;
    r.finish()?;

    let mut values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format {
            offset: (values_at + 4 * pos) as u64,
            message: "non-finite value".into(),
        });
    }
    let normalized = values.iter().any(|v| *v < 0.0 || *v > 1.0);
    if normalized {
        let (lo, hi) = values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for v in &mut values {
            *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    let cube = HsiCube::new(h as usize, w as usize, wavelengths, values).map_err(|e| Error::Format {
        offset: 20,
        message: e.to_string(),
    })?;
    Ok(LoadedCube { cube, normalized })
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<LoadedCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn encode_labels(labels: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 2 * labels.labels().len());
    out.extend_from_slice(LABEL_MAGIC);
    for v in [
        FORMAT_VERSION,
        labels.height() as u32,
        labels.width() as u32,
        labels.num_classes() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in labels.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelMap> {
    let mut r = Reader { bytes, offset: 0 };
    r.header(LABEL_MAGIC)?;
    let (h, w) = (r.u32("height")?, r.u32("width")?);
    let classes_at = r.offset as u64;
    let num_classes = r.u32("class count")?;
    let num_classes = u16::try_from(num_classes).map_err(|_| Error::Format {
        offset: classes_at,
        message: format!("class count {num_classes} exceeds u16"),
    })?;
    let raw = r.take(r.count(&[h, w], 2)?, "labels")?;
    r.finish()?;
    let labels = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelMap::new(h as usize, w as usize, num_classes, labels).map_err(|e| Error::Format {
        offset: 20,
        message: e.to_string(),
    })
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_labels(&bytes)
}
