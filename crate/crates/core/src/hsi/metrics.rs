//! Reconstruction (MRAE, PSNR) and classification (OA, AA, Kappa) metrics.

use super::{LabelMap, MetricMap, AA, KAPPA, MRAE, OA, PSNR};
use crate::error::{Error, Result};

/// Guard added to the reference in the MRAE denominator.
pub const MRAE_EPSILON: f64 = 1e-8;

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{a} reconstructed entries vs {b} reference entries")));
    }
    if a == 0 {
        return Err(Error::shape("empty inputs"));
    }
    Ok(())
}

/// Mean of `|rec - ref| / (ref + 1e-8)` over all entries.
pub fn mrae(reconstructed: &[f64], reference: &[f64]) -> Result<f64> {
    check_same_len(reconstructed.len(), reference.len())?;
    let sum: f64 = reconstructed
        .iter()
        .zip(reference)
        .map(|(r, t)| (r - t).abs() / (t + MRAE_EPSILON))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// PSNR in dB with peak 1.0. Identical inputs give `f64::INFINITY`.
pub fn psnr(reconstructed: &[f64], reference: &[f64]) -> Result<f64> {
    check_same_len(reconstructed.len(), reference.len())?;
    let mse = reconstructed
        .iter()
        .zip(reference)
        .map(|(r, t)| (r - t) * (r - t))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub fn reconstruction_metrics(reconstructed: &[f64], reference: &[f64]) -> Result<MetricMap> {
    Ok(MetricMap::from([
        (MRAE.to_string(), mrae(reconstructed, reference)?),
        (PSNR.to_string(), psnr(reconstructed, reference)?),
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationScores {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

impl ClassificationScores {
    pub fn to_metric_map(self) -> MetricMap {
        MetricMap::from([
            (OA.to_string(), self.oa),
            (AA.to_string(), self.aa),
            (KAPPA.to_string(), self.kappa),
        ])
    }
}

/// OA/AA/Kappa over paired predictions and ground truth. Pairs whose truth
/// is background (0) are skipped.
pub fn classification_scores(predicted: &[u16], truth: &[u16], num_classes: u16) -> Result<ClassificationScores> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} reference labels",
            predicted.len(),
            truth.len()
        )));
    }
    let c = num_classes as usize + 1;
    let mut confusion = vec![0u64; c * c];
    for (&p, &t) in predicted.iter().zip(truth) {
        if t == 0 {
            continue;
        }
        if p > num_classes || t > num_classes {
            return Err(Error::invalid(format!(
                "label {} exceeds num_classes {num_classes}",
                p.max(t)
            )));
        }
        confusion[t as usize * c + p as usize] += 1;
    }
    let total: u64 = confusion.iter().sum();
    if total == 0 {
        return Err(Error::invalid("no non-background pixels to score"));
    }
    let total_f = total as f64;
    let correct: u64 = (1..c).map(|k| confusion[k * c + k]).sum();
    let oa = correct as f64 / total_f;

    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut expected = 0.0;
    for k in 1..c {
        let row: u64 = confusion[k * c..(k + 1) * c].iter().sum();
        let col: u64 = (0..c).map(|r| confusion[r * c + k]).sum();
        if row > 0 {
            recall_sum += confusion[k * c + k] as f64 / row as f64;
            present += 1;
        }
        expected += (row as f64 / total_f) * (col as f64 / total_f);
    }
    let aa = recall_sum / present as f64;
    let kappa = if expected >= 1.0 {
        if oa >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - expected) / (1.0 - expected)
    };
    Ok(ClassificationScores { oa, aa, kappa })
}

/// Scores a full predicted label image against a reference map.
pub fn classification_metrics(predicted: &[u16], reference: &LabelMap) -> Result<ClassificationScores> {
    if predicted.len() != reference.labels().len() {
        return Err(Error::shape(format!(
            "{} predictions vs {}x{} reference",
            predicted.len(),
            reference.height(),
            reference.width()
        )));
    }
    classification_scores(predicted, reference.labels(), reference.num_classes())
}
