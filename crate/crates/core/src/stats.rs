//! Unsupervised band statistics: per-band Shannon entropy and the spectral
//! angle between band images, plus their band-combination averages.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::benchtable::BenchTable;
use crate::error::{Error, Result};
use crate::hsi::{BandCombination, HsiCube};

/// Histogram bins over `[0, 1]` used for entropy.
pub const ENTROPY_BINS: usize = 256;

/// Shannon entropy in bits of one band, histogrammed into 256 uniform bins.
pub fn band_entropy(cube: &HsiCube, band: usize) -> Result<f64> {
    cube.check_band(band)?;
    let mut hist = [0u64; ENTROPY_BINS];
    for &v in cube.band(band) {
        let bin = ((v as f64) * ENTROPY_BINS as f64) as usize;
        hist[bin.min(ENTROPY_BINS - 1)] += 1;
    }
    let total = cube.num_pixels() as f64;
    Ok(hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

fn norm(band: &[f32]) -> f64 {
    band.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
}

/// Spectral angle in radians between two flattened band images.
pub fn sam(cube: &HsiCube, i: usize, j: usize) -> Result<f64> {
    cube.check_band(i)?;
    cube.check_band(j)?;
    let (a, b) = (cube.band(i), cube.band(j));
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::ZeroNorm(i));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm(j));
    }
    if i == j {
        return Ok(0.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Mean entropy of the bands in `bc`.
pub fn bc_entropy(cube: &HsiCube, bc: &BandCombination) -> Result<f64> {
    let sum = bc
        .indices()
        .iter()
        .map(|&b| band_entropy(cube, b))
        .sum::<Result<f64>>()?;
    Ok(sum / bc.len() as f64)
}

/// Mean spectral angle over all unordered band pairs in `bc`.
pub fn bc_sam(cube: &HsiCube, bc: &BandCombination) -> Result<f64> {
    if bc.len() < 2 {
        return Err(Error::invalid("bc_sam needs at least two bands"));
    }
    let idx = bc.indices();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            sum += sam(cube, i, j)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Entropy of every band and the full pairwise SAM matrix, computed once so
/// combination-level statistics become table lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStats {
    pub entropy: Vec<f64>,
    /// Row-major `N x N`, symmetric, zero diagonal.
    pub sam: Vec<f64>,
    num_bands: usize,
}

impl BandStats {
    pub fn compute(cube: &HsiCube) -> Result<Self> {
        let n = cube.num_bands();
        let entropy = (0..n).map(|b| band_entropy(cube, b)).collect::<Result<Vec<_>>>()?;
        let rows = crate::parallel::install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| (0..n).map(|j| if j <= i { Ok(0.0) } else { sam(cube, i, j) }).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
        })?;
        let mut sam = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                sam[i * n + j] = rows[i][j];
                sam[j * n + i] = rows[i][j];
            }
        }
        Ok(Self { entropy, sam, num_bands: n })
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn sam_between(&self, i: usize, j: usize) -> f64 {
        self.sam[i * self.num_bands + j]
    }

    pub fn bc_entropy(&self, bc: &BandCombination) -> f64 {
        bc.indices().iter().map(|&b| self.entropy[b]).sum::<f64>() / bc.len() as f64
    }

    /// Mean pairwise SAM; zero for single-band combinations.
    pub fn bc_sam(&self, bc: &BandCombination) -> f64 {
        let idx = bc.indices();
        if idx.len() < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                sum += self.sam_between(i, j);
            }
        }
        sum / (idx.len() * (idx.len() - 1) / 2) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub bands: BandCombination,
    pub entropy: f64,
    /// Zero for single-band combinations.
    pub sam: f64,
    pub metric: f64,
    pub is_top: bool,
}

/// Number of items in the top `frac` of `n`, rounded down.
pub fn top_count(n: usize, frac: f64) -> usize {
    ((frac.clamp(0.0, 1.0) * n as f64) + 1e-9).floor() as usize
}

/// Joins band statistics with seed-averaged benchmark values. Rows come back
/// best-first under the metric's direction (ties: smaller bands first) and
/// the first `floor(top_frac * len)` rows are flagged.
pub fn stats_scatter(
    cube: &HsiCube,
    bcs: &[BandCombination],
    bench: &BenchTable,
    metric: &str,
    top_frac: f64,
) -> Result<Vec<ScatterRow>> {
    let direction = bench.task().direction(metric)?;
    let missing: Vec<String> = bcs
        .iter()
        .filter(|bc| bench.record(bc).is_none())
        .map(ToString::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(Error::NotFound(format!("band combinations not in table: {}", missing.join(", "))));
    }
    let stats = BandStats::compute(cube)?;
    let mut rows = bcs
        .iter()
        .map(|bc| {
            bc.check_bands(cube.num_bands())?;
            Ok(ScatterRow {
                bands: bc.clone(),
                entropy: stats.bc_entropy(bc),
                sam: stats.bc_sam(bc),
                metric: bench.query_bands(bc)?[metric],
                is_top: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        direction
            .utility(b.metric)
            .total_cmp(&direction.utility(a.metric))
            .then_with(|| a.bands.cmp(&b.bands))
    });
    let top = top_count(rows.len(), top_frac);
    for row in rows.iter_mut().take(top) {
        row.is_top = true;
    }
    Ok(rows)
}

pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("bands,entropy_bits,sam_rad,metric,is_top\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.bands, r.entropy, r.sam, r.metric, r.is_top);
    }
    out
}
