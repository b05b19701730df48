//! Evaluators map a band combination and a seed to task metrics.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BenchTable;
use crate::error::{Error, Result};
use crate::hsi::metrics::{classification_scores, reconstruction_metrics};
use crate::hsi::{BandCombination, HsiCube, LabelMap, MetricMap, TaskKind, TaskSpec};
use crate::linalg;

/// Scores band combinations. Implementations must be deterministic in
/// `(bc, seed)`.
pub trait Evaluator: Sync {
    fn task(&self) -> &TaskSpec;
    fn num_bands(&self) -> usize;
    fn dataset_id(&self) -> &str;
    fn backbone_id(&self) -> &str;
    fn evaluate(&self, bc: &BandCombination, seed: u64) -> Result<MetricMap>;
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn task(&self) -> &TaskSpec {
        (**self).task()
    }
    fn num_bands(&self) -> usize {
        (**self).num_bands()
    }
    fn dataset_id(&self) -> &str {
        (**self).dataset_id()
    }
    fn backbone_id(&self) -> &str {
        (**self).backbone_id()
    }
    fn evaluate(&self, bc: &BandCombination, seed: u64) -> Result<MetricMap> {
        (**self).evaluate(bc, seed)
    }
}

/// Fraction of pixels held out for validation by the live evaluators.
pub const DEFAULT_VAL_FRACTION: f64 = 0.5;

/// Seeded train/validation split of `pixels`.
pub fn split_pixels(pixels: &[usize], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = pixels.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((pixels.len() as f64 * val_fraction).round() as usize).clamp(1, pixels.len().saturating_sub(1).max(1));
    let train = shuffled.split_off(n_val);
    (train, shuffled)
}

/// Pixel-major copy of a cube in `f64`, so per-pixel spectra are contiguous.
#[derive(Debug, Clone)]
struct PixelMatrix {
    bands: usize,
    data: Vec<f64>,
}

impl PixelMatrix {
    fn new(cube: &HsiCube) -> Self {
        let (p, n) = (cube.num_pixels(), cube.num_bands());
        let mut data = vec![0.0; p * n];
        for b in 0..n {
            for (i, &v) in cube.band(b).iter().enumerate() {
                data[i * n + b] = f64::from(v);
            }
        }
        Self { bands: n, data }
    }

    fn spectrum(&self, pixel: usize) -> &[f64] {
        &self.data[pixel * self.bands..(pixel + 1) * self.bands]
    }
}

/// Which small classifier a [`ClassificationEvaluator`] trains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classifier {
    NearestCentroid,
    /// One-vs-rest least squares on `{0, 1}` targets with the given penalty.
    Ridge { lambda: f64 },
}

/// Trains a classifier on the selected bands of a seeded pixel split and
/// reports OA/AA/Kappa on the held-out pixels.
#[derive(Debug, Clone)]
pub struct ClassificationEvaluator {
    task: TaskSpec,
    pixels: Arc<PixelMatrix>,
    labels: Arc<LabelMap>,
    labeled: Vec<usize>,
    classifier: Classifier,
    val_fraction: f64,
    dataset_id: String,
    backbone_id: String,
}

impl ClassificationEvaluator {
    pub fn new(cube: &HsiCube, labels: &LabelMap, classifier: Classifier, dataset_id: impl Into<String>) -> Result<Self> {
        if !labels.matches(cube) {
            return Err(Error::shape(format!(
                "labels {}x{} do not match cube {}x{}",
                labels.height(),
                labels.width(),
                cube.height(),
                cube.width()
            )));
        }
        let labeled = labels.labeled_pixels();
        if labeled.len() < 2 {
            return Err(Error::invalid("need at least two labelled pixels"));
        }
        let backbone_id = match classifier {
            Classifier::NearestCentroid => "nearest-centroid".to_string(),
            Classifier::Ridge { .. } => "ridge".to_string(),
        };
        Ok(Self {
            task: TaskSpec::new(TaskKind::Classification),
            pixels: Arc::new(PixelMatrix::new(cube)),
            labels: Arc::new(labels.clone()),
            labeled,
            classifier,
            val_fraction: DEFAULT_VAL_FRACTION,
            dataset_id: dataset_id.into(),
            backbone_id,
        })
    }

    pub fn with_val_fraction(mut self, fraction: f64) -> Self {
        self.val_fraction = fraction;
        self
    }

    fn features(&self, pixel: usize, bc: &BandCombination) -> impl Iterator<Item = f64> + '_ {
        let spectrum = self.pixels.spectrum(pixel);
        bc.indices().to_vec().into_iter().map(move |b| spectrum[b])
    }

    fn predict_nearest_centroid(&self, bc: &BandCombination, train: &[usize], val: &[usize]) -> Vec<u16> {
        let k = bc.len();
        let classes = usize::from(self.labels.num_classes());
        let mut sums = vec![0.0; (classes + 1) * k];
        let mut counts = vec![0usize; classes + 1];
        for &p in train {
            let c = usize::from(self.labels.labels()[p]);
            counts[c] += 1;
            for (j, v) in self.features(p, bc).enumerate() {
                sums[c * k + j] += v;
            }
        }
        val.iter()
            .map(|&p| {
                let x: Vec<f64> = self.features(p, bc).collect();
                let mut best = (f64::INFINITY, 0u16);
                for c in 1..=classes {
                    if counts[c] == 0 {
                        continue;
                    }
                    let d: f64 = x
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let diff = v - sums[c * k + j] / counts[c] as f64;
                            diff * diff
                        })
                        .sum();
                    if d < best.0 {
                        best = (d, c as u16);
                    }
                }
                best.1
            })
            .collect()
    }

    fn predict_ridge(&self, bc: &BandCombination, train: &[usize], val: &[usize], lambda: f64) -> Result<Vec<u16>> {
        let k = bc.len();
        let classes = usize::from(self.labels.num_classes());
        let x = DMatrix::from_fn(train.len(), k, |r, c| self.pixels.spectrum(train[r])[bc.indices()[c]]);
        let y = DMatrix::from_fn(train.len(), classes, |r, c| {
            f64::from(u8::from(usize::from(self.labels.labels()[train[r]]) == c + 1))
        });
        let (coef, intercept) = linalg::ridge(&x, &y, None, lambda)?;
        Ok(val
            .iter()
            .map(|&p| {
                let feats: Vec<f64> = self.features(p, bc).collect();
                let mut best = (f64::NEG_INFINITY, 1u16);
                for c in 0..classes {
                    let score = intercept[c] + (0..k).map(|j| coef[(j, c)] * feats[j]).sum::<f64>();
                    if score > best.0 {
                        best = (score, c as u16 + 1);
                    }
                }
                best.1
            })
            .collect())
    }
}

impl Evaluator for ClassificationEvaluator {
    fn task(&self) -> &TaskSpec {
        &self.task
    }

    fn num_bands(&self) -> usize {
        self.pixels.bands
    }

    fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    fn backbone_id(&self) -> &str {
        &self.backbone_id
    }

    fn evaluate(&self, bc: &BandCombination, seed: u64) -> Result<MetricMap> {
        bc.check_bands(self.num_bands())?;
        let (train, val) = split_pixels(&self.labeled, self.val_fraction, seed);
        let predicted = match self.classifier {
            Classifier::NearestCentroid => self.predict_nearest_centroid(bc, &train, &val),
            Classifier::Ridge { lambda } => self.predict_ridge(bc, &train, &val, lambda)?,
        };
        let truth: Vec<u16> = val.iter().map(|&p| self.labels.labels()[p]).collect();
        Ok(classification_scores(&predicted, &truth, self.labels.num_classes())?.to_metric_map())
    }
}

/// Linear least-squares reconstruction of the full spectrum from the
/// selected bands, fitted on a seeded pixel split and scored on the rest.
#[derive(Debug, Clone)]
pub struct ReconstructionEvaluator {
    task: TaskSpec,
    pixels: Arc<PixelMatrix>,
    all_pixels: Vec<usize>,
    lambda: f64,
    val_fraction: f64,
    dataset_id: String,
}

/// Ridge penalty keeping the band-to-spectrum regression well posed.
pub const RECONSTRUCTION_LAMBDA: f64 = 1e-9;

impl ReconstructionEvaluator {
    pub fn new(cube: &HsiCube, dataset_id: impl Into<String>) -> Result<Self> {
        if cube.num_pixels() < 2 {
            return Err(Error::invalid("need at least two pixels"));
        }
        Ok(Self {
            task: TaskSpec::new(TaskKind::Reconstruction),
            pixels: Arc::new(PixelMatrix::new(cube)),
            all_pixels: (0..cube.num_pixels()).collect(),
            lambda: RECONSTRUCTION_LAMBDA,
            val_fraction: DEFAULT_VAL_FRACTION,
            dataset_id: dataset_id.into(),
        })
    }

    pub fn with_val_fraction(mut self, fraction: f64) -> Self {
        self.val_fraction = fraction;
        self
    }

    /// Reconstructed spectra (pixel-major) and references for the
    /// validation pixels of `seed`.
    pub fn reconstruct(&self, bc: &BandCombination, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        bc.check_bands(self.num_bands())?;
        let n = self.num_bands();
        let (train, val) = split_pixels(&self.all_pixels, self.val_fraction, seed);
        let select = |p: usize, c: usize| self.pixels.spectrum(p)[bc.indices()[c]];
        let x = DMatrix::from_fn(train.len(), bc.len(), |r, c| select(train[r], c));
        let y = DMatrix::from_fn(train.len(), n, |r, c| self.pixels.spectrum(train[r])[c]);
        let (coef, intercept) = linalg::ridge(&x, &y, None, self.lambda)?;
        let xv = DMatrix::from_fn(val.len(), bc.len(), |r, c| select(val[r], c));
        let mut pred = xv * coef;
        let mut out = Vec::with_capacity(val.len() * n);
        let mut reference = Vec::with_capacity(val.len() * n);
        for (r, &p) in val.iter().enumerate() {
            for c in 0..n {
                pred[(r, c)] += intercept[c];
                out.push(pred[(r, c)]);
            }
            reference.extend_from_slice(self.pixels.spectrum(p));
        }
        Ok((out, reference))
    }
}

impl Evaluator for ReconstructionEvaluator {
    fn task(&self) -> &TaskSpec {
        &self.task
    }

    fn num_bands(&self) -> usize {
        self.pixels.bands
    }

    fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    fn backbone_id(&self) -> &str {
        "least-squares"
    }

    fn evaluate(&self, bc: &BandCombination, seed: u64) -> Result<MetricMap> {
        let (out, reference) = self.reconstruct(bc, seed)?;
        reconstruction_metrics(&out, &reference)
    }
}

/// Answers from a benchmark table: every seed gets the seed-averaged values.
#[derive(Debug, Clone, Copy)]
pub struct TableEvaluator<'a> {
    table: &'a BenchTable,
    num_bands: usize,
}

impl<'a> TableEvaluator<'a> {
    pub fn new(table: &'a BenchTable, num_bands: usize) -> Self {
        Self { table, num_bands }
    }
}

impl Evaluator for TableEvaluator<'_> {
    fn task(&self) -> &TaskSpec {
        self.table.task()
    }

    fn num_bands(&self) -> usize {
        self.num_bands
    }

    fn dataset_id(&self) -> &str {
        self.table.dataset_id()
    }

    fn backbone_id(&self) -> &str {
        self.table.backbone_id()
    }

    fn evaluate(&self, bc: &BandCombination, _seed: u64) -> Result<MetricMap> {
        self.table.query_bands(bc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsi::synth::{gen_synth_classification, gen_synth_reconstruction, SynthConfig};
    use crate::hsi::{OA, PSNR};

    #[test]
    fn split_is_seeded_partition() {
        let pixels: Vec<usize> = (0..10).collect();
        let (t, v) = split_pixels(&pixels, 0.5, 3);
        assert_eq!((t.len(), v.len()), (5, 5));
        let mut all = [t.clone(), v.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, pixels);
        assert_eq!(split_pixels(&pixels, 0.5, 3), (t, v));
    }

    #[test]
    fn noiseless_two_class_scene_is_separable_by_any_informative_band() {
        let cfg = SynthConfig {
            num_classes: 2,
            noise_std: 0.0,
            informative_bands: Some(vec![2, 9, 13]),
            ..Default::default()
        };
        let (cube, labels, informative) = gen_synth_classification(&cfg).unwrap();
        let eval = ClassificationEvaluator::new(&cube, &labels, Classifier::NearestCentroid, "synth").unwrap();
        for &b in informative.indices() {
            let m = eval.evaluate(&BandCombination::new(vec![b]).unwrap(), 0).unwrap();
            assert_eq!(m[OA], 1.0, "band {b}");
        }
    }

    #[test]
    fn evaluators_are_deterministic() {
        let (cube, labels, _) = gen_synth_classification(&SynthConfig::default()).unwrap();
        let bc = BandCombination::new(vec![1, 4, 7]).unwrap();
        for classifier in [Classifier::NearestCentroid, Classifier::Ridge { lambda: 1e-3 }] {
            let eval = ClassificationEvaluator::new(&cube, &labels, classifier, "synth").unwrap();
            assert_eq!(eval.evaluate(&bc, 5).unwrap(), eval.evaluate(&bc, 5).unwrap());
        }
        let rec = ReconstructionEvaluator::new(&gen_synth_reconstruction(&SynthConfig::default()).unwrap(), "synth").unwrap();
        assert_eq!(rec.evaluate(&bc, 1).unwrap(), rec.evaluate(&bc, 1).unwrap());
    }

    #[test]
    fn rank_one_scene_reconstructs_from_any_band() {
        let cfg = SynthConfig { basis_rank: 1, noise_std: 0.0, side: 8, ..Default::default() };
        let cube = gen_synth_reconstruction(&cfg).unwrap();
        let eval = ReconstructionEvaluator::new(&cube, "synth").unwrap();
        for b in [0, 7, 15] {
            let m = eval.evaluate(&BandCombination::new(vec![b]).unwrap(), 0).unwrap();
            // f32 storage limits exactness to ~1e-7 per value
            assert!(m[PSNR] > 110.0, "band {b}: {m:?}");
        }
    }

    #[test]
    fn mismatched_labels_rejected() {
        let (cube, _, _) = gen_synth_classification(&SynthConfig::default()).unwrap();
        let labels = LabelMap::new(2, 2, 2, vec![1, 2, 1, 2]).unwrap();
        assert!(ClassificationEvaluator::new(&cube, &labels, Classifier::NearestCentroid, "x").is_err());
    }
}
