//! Hyperspectral data model: cubes, label maps, band combinations and task
//! descriptions, plus file formats, synthetic generators and metrics.

mod combination;
pub mod io;
pub mod metrics;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use combination::{count_combinations, rank_combination, unrank_combination, BandCombination};

/// Metric name → value.
pub type MetricMap = BTreeMap<String, f64>;

pub const OA: &str = "OA";
pub const AA: &str = "AA";
pub const KAPPA: &str = "Kappa";
pub const MRAE: &str = "MRAE";
pub const PSNR: &str = "PSNR";

/// An `H x W x N` reflectance volume stored band-major: `N` planes, each a
/// row-major `H x W` image.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    wavelengths: Vec<f64>,
    values: Vec<f32>,
}

impl HsiCube {
    pub fn new(height: usize, width: usize, wavelengths: Vec<f64>, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || wavelengths.is_empty() {
            return Err(Error::invalid("cube dimensions must be positive"));
        }
        if wavelengths.windows(2).any(|w| !(w[0] < w[1])) || wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("wavelengths must be finite and strictly increasing"));
        }
        let expected = height * width * wavelengths.len();
        if values.len() != expected {
            return Err(Error::shape(format!(
                "expected {expected} values for {height}x{width}x{}, got {}",
                wavelengths.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::invalid(format!(
                "value {} at index {pos} is not a finite reflectance in [0, 1]",
                values[pos]
            )));
        }
        Ok(Self {
            height,
            width,
            wavelengths,
            values,
        })
    }

    /// Evenly spaced wavelengths from 400 nm to 700 nm, the usual visible range.
    pub fn default_wavelengths(num_bands: usize) -> Vec<f64> {
        if num_bands == 1 {
            return vec![550.0];
        }
        let step = 300.0 / (num_bands - 1) as f64;
        (0..num_bands).map(|i| 400.0 + step * i as f64).collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// The `H*W` plane of one band.
    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.num_pixels();
        &self.values[band * n..(band + 1) * n]
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.values[band * self.num_pixels() + row * self.width + col]
    }

    /// Spectrum of the pixel at flat spatial index `pixel`.
    pub fn spectrum(&self, pixel: usize) -> Vec<f32> {
        let n = self.num_pixels();
        (0..self.num_bands()).map(|b| self.values[b * n + pixel]).collect()
    }

    pub fn check_band(&self, band: usize) -> Result<()> {
        if band < self.num_bands() {
            Ok(())
        } else {
            Err(Error::BandOutOfRange {
                index: band,
                num_bands: self.num_bands(),
            })
        }
    }

    /// Copies the bands of `bc` into a new cube, in combination order.
    pub fn select_bands(&self, bc: &BandCombination) -> Result<HsiCube> {
        bc.check_bands(self.num_bands())?;
        let mut values = Vec::with_capacity(bc.len() * self.num_pixels());
        for &b in bc.indices() {
            values.extend_from_slice(self.band(b));
        }
        let wavelengths = bc.indices().iter().map(|&b| self.wavelengths[b]).collect();
        Ok(HsiCube {
            height: self.height,
            width: self.width,
            wavelengths,
            values,
        })
    }
}

/// Per-pixel class identifiers; `0` marks background pixels that are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: u16,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_classes: u16, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::shape(format!(
                "expected {} labels for {height}x{width}, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > num_classes) {
            return Err(Error::invalid(format!("label {l} exceeds num_classes {num_classes}")));
        }
        if labels.iter().all(|&l| l == 0) {
            return Err(Error::invalid("label map has no non-background pixels"));
        }
        Ok(Self {
            height,
            width,
            num_classes,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Flat indices of all non-background pixels.
    pub fn labeled_pixels(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn matches(&self, cube: &HsiCube) -> bool {
        self.height == cube.height() && self.width == cube.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Reconstruction,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Reconstruction => "reconstruction",
        })
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" | "cls" => Ok(TaskKind::Classification),
            "reconstruction" | "rec" => Ok(TaskKind::Reconstruction),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    /// Maps a metric value onto a scale where larger is always better.
    pub fn utility(self, value: f64) -> f64 {
        match self {
            Direction::HigherBetter => value,
            Direction::LowerBetter => -value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub primary_metric: &'static str,
    pub metric_directions: BTreeMap<&'static str, Direction>,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        let (primary_metric, metric_directions) = match kind {
            TaskKind::Classification => (
                OA,
                BTreeMap::from([
                    (OA, Direction::HigherBetter),
                    (AA, Direction::HigherBetter),
                    (KAPPA, Direction::HigherBetter),
                ]),
            ),
            TaskKind::Reconstruction => (
                PSNR,
                BTreeMap::from([(MRAE, Direction::LowerBetter), (PSNR, Direction::HigherBetter)]),
            ),
        };
        Self {
            kind,
            primary_metric,
            metric_directions,
        }
    }

    pub fn direction(&self, metric: &str) -> Result<Direction> {
        self.metric_directions
            .get(metric)
            .copied()
            .ok_or_else(|| Error::invalid(format!("metric {metric:?} is not defined for {} tasks", self.kind)))
    }

    pub fn metrics(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.metric_directions.keys().copied()
    }
}
