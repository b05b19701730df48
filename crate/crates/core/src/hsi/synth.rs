//! Synthetic classification and reconstruction scenes whose best band
//! combinations can be found by brute force.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BandCombination, HsiCube, LabelMap};
use crate::error::{Error, Result};

/// Side length of the square label regions in classification scenes.
const REGION: usize = 4;
/// Fraction of label regions left as background.
const BACKGROUND_FRACTION: f64 = 0.1;
/// Class-mean spacing used when the noise level is zero.
const MIN_SPACING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_bands: usize,
    /// Spatial side length; scenes are square.
    pub side: usize,
    pub num_classes: u16,
    /// Number of basis spectra mixed into each reconstruction pixel.
    pub basis_rank: usize,
    /// Size of the informative band subset (classification).
    pub informative: usize,
    /// Explicit informative bands; drawn at random when absent.
    pub informative_bands: Option<Vec<usize>>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_bands: 16,
            side: 32,
            num_classes: 3,
            basis_rank: 3,
            informative: 4,
            informative_bands: None,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bands < 2 {
            return Err(Error::invalid("need at least two bands"));
        }
        if self.side == 0 {
            return Err(Error::invalid("side length must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!("noise std {} must be finite and >= 0", self.noise_std)));
        }
        Ok(())
    }

    fn validate_classification(&self) -> Result<()> {
        self.validate()?;
        if self.num_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        let count = self.informative_bands.as_ref().map_or(self.informative, Vec::len);
        if count == 0 || count >= self.num_bands {
            return Err(Error::invalid(format!(
                "informative subset size {count} must be in 1..{}",
                self.num_bands
            )));
        }
        if let Some(bands) = &self.informative_bands {
            BandCombination::for_bands(bands.clone(), self.num_bands)?;
        }
        if self.half_range() > 0.45 {
            return Err(Error::invalid(format!(
                "{} classes separated by 4 sigma ({}) do not fit in [0, 1]",
                self.num_classes, self.noise_std
            )));
        }
        Ok(())
    }

    fn spacing_unit(&self) -> f64 {
        (4.0 * self.noise_std).max(MIN_SPACING)
    }

    /// Half the spread of class means on the most separated band.
    fn half_range(&self) -> f64 {
        self.spacing_unit() * MAX_SPACING_FACTOR * f64::from(self.num_classes - 1) / 2.0
    }
}

/// Informative bands get spacing factors spread over `[1, MAX_SPACING_FACTOR]`.
const MAX_SPACING_FACTOR: f64 = 1.6;

fn base_spectrum(n: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|b| 0.5 + 0.2 * (std::f64::consts::TAU * 1.3 * b as f64 / n as f64 + phase).sin())
        .collect()
}

fn noise(sigma: f64) -> Option<Normal<f64>> {
    (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated"))
}

fn assemble(side: usize, n: usize, pixel_means: impl Fn(usize, usize) -> f64, sigma: f64, rng: &mut ChaCha8Rng) -> Result<HsiCube> {
    let pixels = side * side;
    let dist = noise(sigma);
    let mut values = vec![0f32; pixels * n];
    // pixel-major draw order keeps the noise stream independent of layout
    for p in 0..pixels {
        for b in 0..n {
            let eps = dist.as_ref().map_or(0.0, |d| d.sample(rng));
            values[b * pixels + p] = (pixel_means(p, b) + eps).clamp(0.0, 1.0) as f32;
        }
    }
    HsiCube::new(side, side, HsiCube::default_wavelengths(n), values)
}

/// A labelled scene where classes differ only on the informative bands.
///
/// Class means on an informative band are evenly spaced around the shared
/// base spectrum, at least `4 * noise_std` apart, with a per-band spacing
/// factor so that some informative bands separate classes better than
/// others. Everywhere else every class (and the background) follows the
/// base spectrum.
pub fn gen_synth_classification(cfg: &SynthConfig) -> Result<(HsiCube, LabelMap, BandCombination)> {
    cfg.validate_classification()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_bands;
    let informative = match &cfg.informative_bands {
        Some(bands) => BandCombination::for_bands(bands.clone(), n)?,
        None => {
            let picked = rand::seq::index::sample(&mut rng, n, cfg.informative).into_vec();
            BandCombination::from_unsorted(picked)?
        }
    };
    let base = base_spectrum(n, rng.random_range(0.0..std::f64::consts::TAU));

    let m = informative.len();
    let mut factors: Vec<f64> = (0..m)
        .map(|i| {
            if m == 1 {
                MAX_SPACING_FACTOR
            } else {
                1.0 + (MAX_SPACING_FACTOR - 1.0) * i as f64 / (m - 1) as f64
            }
        })
        .collect();
    factors.shuffle(&mut rng);

    let classes = usize::from(cfg.num_classes);
    // means[class][band], class 0 = background
    let mut means = vec![base.clone(); classes + 1];
    for (&band, factor) in informative.indices().iter().zip(&factors) {
        let spacing = cfg.spacing_unit() * factor;
        let half = spacing * (classes - 1) as f64 / 2.0;
        let center = base[band].clamp(half + 0.02, 1.0 - half - 0.02);
        for (c, row) in means.iter_mut().enumerate().skip(1) {
            row[band] = center - half + spacing * (c - 1) as f64;
        }
        means[0][band] = center;
    }

    let side = cfg.side;
    let regions = side.div_ceil(REGION);
    let mut region_labels: Vec<u16> = (0..regions * regions)
        .map(|_| {
            if rng.random_bool(BACKGROUND_FRACTION) {
                0
            } else {
                rng.random_range(1..=cfg.num_classes)
            }
        })
        .collect();
    if region_labels.iter().all(|&l| l == 0) {
        region_labels[0] = 1;
    }
    let labels: Vec<u16> = (0..side * side)
        .map(|p| {
            let (r, c) = (p / side, p % side);
            region_labels[(r / REGION) * regions + c / REGION]
        })
        .collect();

    let cube = assemble(side, n, |p, b| means[labels[p] as usize][b], cfg.noise_std, &mut rng)?;
    let label_map = LabelMap::new(side, side, cfg.num_classes, labels)?;
    Ok((cube, label_map, informative))
}

/// Smooth, strictly positive basis spectra: Gaussian bumps with centres
/// spread across the band axis on a raised floor.
pub fn basis_spectra(n: usize, rank: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let seg = n as f64 / rank as f64;
    let width = (seg / 2.5).max(0.75);
    (0..rank)
        .map(|d| {
            let centre = (d as f64 + 0.5 + rng.random_range(-0.25..0.25)) * seg;
            (0..n)
                .map(|b| {
                    let x = (b as f64 - centre) / width;
                    0.15 + 0.85 * (-0.5 * x * x).exp()
                })
                .collect()
        })
        .collect()
}

/// A scene where every pixel is a non-negative mix of `basis_rank` basis
/// spectra plus noise.
pub fn gen_synth_reconstruction(cfg: &SynthConfig) -> Result<HsiCube> {
    cfg.validate()?;
    if cfg.basis_rank == 0 || cfg.basis_rank >= cfg.num_bands {
        return Err(Error::invalid(format!(
            "basis rank {} must be in 1..{}",
            cfg.basis_rank, cfg.num_bands
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_bands;
    let basis = basis_spectra(n, cfg.basis_rank, &mut rng);
    let pixels = cfg.side * cfg.side;
    let abundances: Vec<Vec<f64>> = (0..pixels)
        .map(|_| {
            let raw: Vec<f64> = (0..cfg.basis_rank).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let brightness = rng.random_range(0.3..0.95);
            raw.into_iter().map(|a| a / total * brightness).collect()
        })
        .collect();
    assemble(
        cfg.side,
        n,
        |p, b| abundances[p].iter().zip(&basis).map(|(a, s)| a * s[b]).sum(),
        cfg.noise_std,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_is_deterministic() {
        let cfg = SynthConfig { seed: 7, ..Default::default() };
        let a = gen_synth_classification(&cfg).unwrap();
        let b = gen_synth_classification(&cfg).unwrap();
        assert_eq!(a, b);
        let other = gen_synth_classification(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn classes_differ_only_on_informative_bands() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            informative_bands: Some(vec![2, 9, 13]),
            ..Default::default()
        };
        let (cube, labels, informative) = gen_synth_classification(&cfg).unwrap();
        assert_eq!(informative.indices(), &[2, 9, 13]);
        for b in 0..cube.num_bands() {
            let plane = cube.band(b);
            let distinct = plane.iter().map(|v| v.to_bits()).collect::<std::collections::BTreeSet<_>>();
            if informative.contains(b) {
                assert!(distinct.len() > 1, "band {b}");
            } else {
                assert_eq!(distinct.len(), 1, "band {b}");
            }
        }
        // separation of class means >= 4 sigma is checked at sigma = 0.05 below
        let _ = labels;
    }

    #[test]
    fn class_means_are_separated_by_four_sigma() {
        let sigma = 0.05;
        let cfg = SynthConfig {
            noise_std: sigma,
            informative_bands: Some(vec![2, 9, 13]),
            side: 64,
            ..Default::default()
        };
        let (cube, labels, informative) = gen_synth_classification(&cfg).unwrap();
        for &b in informative.indices() {
            let mut sums = vec![(0.0f64, 0usize); cfg.num_classes as usize + 1];
            for (p, &l) in labels.labels().iter().enumerate() {
                sums[l as usize].0 += f64::from(cube.band(b)[p]);
                sums[l as usize].1 += 1;
            }
            let means: Vec<f64> = sums[1..].iter().map(|(s, c)| s / *c as f64).collect();
            for w in means.windows(2) {
                // sample means carry ~sigma/sqrt(300) error
                assert!(w[1] - w[0] > 4.0 * sigma - 0.01, "band {b}: {means:?}");
            }
        }
    }

    #[test]
    fn background_exists_but_is_minor() {
        let (_, labels, _) = gen_synth_classification(&SynthConfig::default()).unwrap();
        let bg = labels.labels().iter().filter(|&&l| l == 0).count();
        assert!(bg < labels.labels().len() / 3);
    }

    #[test]
    fn config_validation() {
        assert!(gen_synth_classification(&SynthConfig { informative: 16, ..Default::default() }).is_err());
        assert!(gen_synth_classification(&SynthConfig { noise_std: -1.0, ..Default::default() }).is_err());
        assert!(gen_synth_classification(&SynthConfig { num_classes: 8, ..Default::default() }).is_err());
        assert!(gen_synth_reconstruction(&SynthConfig { basis_rank: 16, ..Default::default() }).is_err());
    }

    #[test]
    fn reconstruction_is_deterministic_and_in_range() {
        let cfg = SynthConfig { noise_std: 0.01, ..Default::default() };
        let a = gen_synth_reconstruction(&cfg).unwrap();
        assert_eq!(a, gen_synth_reconstruction(&cfg).unwrap());
        assert!(a.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rank_one_scene_is_proportional() {
        let cfg = SynthConfig { basis_rank: 1, noise_std: 0.0, side: 6, ..Default::default() };
        let cube = gen_synth_reconstruction(&cfg).unwrap();
        // each band is a fixed multiple of band 0 across all pixels
        for b in 1..cube.num_bands() {
            let ratio = f64::from(cube.band(b)[0]) / f64::from(cube.band(0)[0]);
            for p in 0..cube.num_pixels() {
                let expect = ratio * f64::from(cube.band(0)[p]);
                assert!((f64::from(cube.band(b)[p]) - expect).abs() < 1e-5);
            }
        }
    }
}
