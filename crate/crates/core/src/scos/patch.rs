//! Patch flattening, the sinusoidal spectral-spatial embedding and the
//! patch datasets the supernet trains on.

use serde::{Deserialize, Serialize};

use crate::benchtable::split_pixels;
use crate::error::{Error, Result};
use crate::hsi::{HsiCube, LabelMap, TaskKind};

/// An `H x W x N` patch with its spatial dimensions merged: an `HW x N`
/// matrix, row-major over spatial sites.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPatch {
    height: usize,
    width: usize,
    num_bands: usize,
    data: Vec<f64>,
}

impl TransformedPatch {
    pub fn sites(&self) -> usize {
        self.height * self.width
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    /// Entry for spatial site `s` (row-major) and band `i`.
    pub fn get(&self, site: usize, band: usize) -> f64 {
        self.data[site * self.num_bands + band]
    }

    /// Row-major `HW x N` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The `N x HW` orientation used by the encoder: row `i` is band `i`'s
    /// flattened image.
    pub fn band_major(&self) -> Vec<f64> {
        let hw = self.sites();
        let mut out = vec![0.0; hw * self.num_bands];
        for s in 0..hw {
            for i in 0..self.num_bands {
                out[i * hw + s] = self.data[s * self.num_bands + i];
            }
        }
        out
    }

    /// Undoes the flattening.
    pub fn to_patch(&self) -> Result<HsiCube> {
        let hw = self.sites();
        let values = self.band_major().into_iter().map(|v| v as f32).collect();
        debug_assert_eq!(hw * self.num_bands, self.data.len());
        HsiCube::new(self.height, self.width, HsiCube::default_wavelengths(self.num_bands), values)
    }
}

/// Flattens a whole cube (taken as one patch) to `HW x N`.
pub fn transform_patch(patch: &HsiCube) -> TransformedPatch {
    let (hw, n) = (patch.num_pixels(), patch.num_bands());
    let mut data = vec![0.0; hw * n];
    for i in 0..n {
        for (s, &v) in patch.band(i).iter().enumerate() {
            data[s * n + i] = f64::from(v);
        }
    }
    TransformedPatch {
        height: patch.height(),
        width: patch.width(),
        num_bands: n,
        data,
    }
}

/// Sinusoidal embedding, `N x HW` row-major: entry `(i, 2j)` is
/// `sin(i / 10000^(2j/HW))` and `(i, 2j+1)` the matching cosine, with 0-based
/// `i` and `j`. For odd `HW` the last column is the sine term alone.
pub fn ape_embedding(num_bands: usize, sites: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_bands * sites];
    for i in 0..num_bands {
        for col in 0..sites {
            let j = col / 2;
            let angle = i as f64 / 10000f64.powf(2.0 * j as f64 / sites as f64);
            out[i * sites + col] = if col % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

/// One training or validation example: a band-major `N x HW` patch and,
/// for classification, the 1-based class of its centre pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: u16,
}

/// Patches cut from one scene, split into training and validation sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScosData {
    pub task: TaskKind,
    pub num_bands: usize,
    pub patch_size: usize,
    /// Zero for reconstruction.
    pub num_classes: u16,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

fn window(cube: &HsiCube, top: isize, left: isize, size: usize) -> Vec<f64> {
    let (h, w, n) = (cube.height() as isize, cube.width() as isize, cube.num_bands());
    let hw = size * size;
    let mut out = vec![0.0; n * hw];
    for i in 0..n {
        let band = cube.band(i);
        for dr in 0..size {
            for dc in 0..size {
                let r = (top + dr as isize).clamp(0, h - 1) as usize;
                let c = (left + dc as isize).clamp(0, w - 1) as usize;
                out[i * hw + dr * size + dc] = f64::from(band[r * w as usize + c]);
            }
        }
    }
    out
}

fn check_split(val_fraction: f64, patch_size: usize) -> Result<()> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction {val_fraction} must be in (0, 1)")));
    }
    if patch_size == 0 {
        return Err(Error::invalid("patch size must be positive"));
    }
    Ok(())
}

impl ScosData {
    pub fn sites(&self) -> usize {
        self.patch_size * self.patch_size
    }

    /// One patch per labeled pixel, centred on it; borders replicate edge
    /// pixels.
    pub fn classification(cube: &HsiCube, labels: &LabelMap, patch_size: usize, val_fraction: f64, seed: u64) -> Result<Self> {
        check_split(val_fraction, patch_size)?;
        if !labels.matches(cube) {
            return Err(Error::shape("label map does not match the cube"));
        }
        let pixels = labels.labeled_pixels();
        if pixels.len() < 2 {
            return Err(Error::invalid("need at least two labeled pixels"));
        }
        let (train, val) = split_pixels(&pixels, val_fraction, seed);
        let half = (patch_size / 2) as isize;
        let sample = |p: usize| Sample {
            input: window(cube, (p / cube.width()) as isize - half, (p % cube.width()) as isize - half, patch_size),
            label: labels.labels()[p],
        };
        Ok(Self {
            task: TaskKind::Classification,
            num_bands: cube.num_bands(),
            patch_size,
            num_classes: labels.num_classes(),
            train: train.into_iter().map(sample).collect(),
            val: val.into_iter().map(sample).collect(),
        })
    }

    /// Non-overlapping tiles covering the scene; partial tiles at the right
    /// and bottom edges are dropped.
    pub fn reconstruction(cube: &HsiCube, patch_size: usize, val_fraction: f64, seed: u64) -> Result<Self> {
        check_split(val_fraction, patch_size)?;
        let (rows, cols) = (cube.height() / patch_size, cube.width() / patch_size);
        if rows * cols < 2 {
            return Err(Error::invalid(format!(
                "a {}x{} scene holds fewer than two {patch_size}x{patch_size} tiles",
                cube.height(),
                cube.width()
            )));
        }
        let tiles: Vec<usize> = (0..rows * cols).collect();
        let (train, val) = split_pixels(&tiles, val_fraction, seed);
        let sample = |t: usize| Sample {
            input: window(cube, ((t / cols) * patch_size) as isize, ((t % cols) * patch_size) as isize, patch_size),
            label: 0,
        };
        Ok(Self {
            task: TaskKind::Reconstruction,
            num_bands: cube.num_bands(),
            patch_size,
            num_classes: 0,
            train: train.into_iter().map(sample).collect(),
            val: val.into_iter().map(sample).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube(h: usize, w: usize, n: usize) -> HsiCube {
        let values = (0..h * w * n).map(|v| (v as f32 * 0.37).fract()).collect();
        HsiCube::new(h, w, HsiCube::default_wavelengths(n), values).unwrap()
    }

    #[test]
    fn single_pixel_patch_is_its_spectrum() {
        let c = cube(1, 1, 5);
        let tp = transform_patch(&c);
        let spectrum: Vec<f64> = c.spectrum(0).into_iter().map(f64::from).collect();
        assert_eq!(tp.as_slice(), spectrum.as_slice());
    }

    #[test]
    fn single_band_patch_is_row_major_column() {
        let c = HsiCube::new(2, 2, vec![500.0], vec![0.125, 0.25, 0.5, 0.75]).unwrap();
        assert_eq!(transform_patch(&c).as_slice(), &[0.125, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn flattening_is_a_bijection() {
        let c = cube(3, 3, 4);
        let tp = transform_patch(&c);
        for s in 0..9 {
            for i in 0..4 {
                assert_eq!(tp.get(s, i), f64::from(c.get(s / 3, s % 3, i)));
            }
        }
        assert_eq!(tp.to_patch().unwrap().values(), c.values());
    }

    #[test]
    fn ape_values() {
        let e = ape_embedding(6, 8);
        for col in 0..8 {
            assert_eq!(e[col], if col % 2 == 0 { 0.0 } else { 1.0 });
        }
        assert_relative_eq!(e[8], 0.841471, epsilon = 1e-6);
        assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(e, ape_embedding(6, 8));
        let odd = ape_embedding(3, 5);
        assert_relative_eq!(odd[5 + 4], (1.0 / 10000f64.powf(4.0 / 5.0)).sin());
    }

    #[test]
    fn datasets_split_and_shape() {
        let c = cube(6, 6, 3);
        let labels = LabelMap::new(6, 6, 2, (0..36).map(|p| (p % 3) as u16).collect()).unwrap();
        let d = ScosData::classification(&c, &labels, 3, 0.5, 1).unwrap();
        assert_eq!(d.train.len() + d.val.len(), 24);
        assert!(d.train.iter().chain(&d.val).all(|s| s.label > 0 && s.input.len() == 27));
        let r = ScosData::reconstruction(&c, 2, 0.5, 1).unwrap();
        assert_eq!(r.train.len() + r.val.len(), 9);
        assert!(ScosData::reconstruction(&c, 4, 0.5, 1).is_err());
        assert!(ScosData::classification(&c, &labels, 3, 1.0, 1).is_err());
    }

    #[test]
    fn centred_window_replicates_borders() {
        let c = cube(4, 4, 1);
        let w = window(&c, -1, -1, 3);
        assert_eq!(w[0], f64::from(c.get(0, 0, 0)));
        assert_eq!(w[4], f64::from(c.get(0, 0, 0)));
        assert_eq!(w[8], f64::from(c.get(1, 1, 0)));
    }
}
