//! Cross-table comparisons: top-set overlap and rank agreement.

use std::collections::BTreeSet;

use super::BenchTable;
use crate::error::{Error, Result};
use crate::hsi::BandCombination;
use crate::stats::top_count;

/// Ranks starting at 1; tied values share the mean of their ranks.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::shape(format!("spearman needs two equal series of length >= 2, got {} and {}", a.len(), b.len())));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::invalid("rank correlation is undefined for a constant series"));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// The best `floor(frac * len)` combinations of `table` under `metric`.
pub fn top_set(table: &BenchTable, metric: &str, frac: f64) -> Result<BTreeSet<BandCombination>> {
    let ranked = table.ranked(metric)?;
    let n = top_count(ranked.len(), frac);
    Ok(ranked.into_iter().take(n).map(|(bc, _)| bc).collect())
}

fn band_universe(table: &BenchTable) -> BTreeSet<usize> {
    table
        .band_combinations()
        .flat_map(|bc| bc.indices().iter().copied())
        .collect()
}

/// Jaccard index of the two tables' top-`frac` sets.
pub fn top_overlap(a: &BenchTable, b: &BenchTable, metric: &str, frac: f64) -> Result<f64> {
    if band_universe(a).is_disjoint(&band_universe(b)) {
        return Err(Error::invalid("tables have disjoint band universes"));
    }
    let (ta, tb) = (top_set(a, metric, frac)?, top_set(b, metric, frac)?);
    let union = ta.union(&tb).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(ta.intersection(&tb).count() as f64 / union as f64)
}

/// Spearman correlation of seed-averaged values over identical key sets.
pub fn rank_correlation(a: &BenchTable, b: &BenchTable, metric: &str) -> Result<f64> {
    let ka: BTreeSet<_> = a.band_combinations().collect();
    let kb: BTreeSet<_> = b.band_combinations().collect();
    if ka != kb {
        let diff: Vec<String> = ka.symmetric_difference(&kb).map(|bc| bc.to_string()).collect();
        return Err(Error::invalid(format!("tables differ on band combinations: {}", diff.join(", "))));
    }
    let va: Vec<f64> = a.values(metric)?.into_iter().map(|(_, v)| v).collect();
    let vb: Vec<f64> = b.values(metric)?.into_iter().map(|(_, v)| v).collect();
    spearman(&va, &vb)
}
