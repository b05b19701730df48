//! Predict-and-expand selection of which combinations to benchmark when the
//! full space is too large: evaluate a random initial set, fit a surrogate
//! on it, then add the combinations the surrogate rates highest.

use std::collections::HashSet;

use rayon::prelude::*;

use super::Evaluator;
use crate::error::{Error, Result};
use crate::hsi::{count_combinations, unrank_combination, BandCombination};
use crate::sampling::PrefixSampler;
use crate::stats::BandStats;
use crate::surrogate::{self, SurrogateConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandConfig {
    /// Combination size.
    pub k: usize,
    /// Size of the random initial set.
    pub n0: usize,
    /// Total number of combinations returned.
    pub budget: usize,
    pub surrogate: SurrogateConfig,
    /// Seeds averaged when evaluating the initial set.
    pub eval_seeds: Vec<u64>,
    pub seed: u64,
}

impl ExpandConfig {
    /// Small-scale defaults: 50 random combinations expanded to 100.
    pub fn desk(k: usize, seed: u64) -> Self {
        Self {
            k,
            n0: 50,
            budget: 100,
            surrogate: SurrogateConfig::default(),
            eval_seeds: vec![0],
            seed,
        }
    }

    /// The sizes used for a 200-band scene: 5,000 initial, 21,600 total.
    pub fn full_scale(k: usize, seed: u64) -> Self {
        Self {
            n0: 5_000,
            budget: 21_600,
            ..Self::desk(k, seed)
        }
    }
}

/// Returns `budget` distinct combinations: the `n0` random initial ones in
/// draw order, then the expansion in predicted order.
pub fn predict_and_expand<E: Evaluator + ?Sized>(
    evaluator: &E,
    stats: Option<&BandStats>,
    cfg: &ExpandConfig,
) -> Result<Vec<BandCombination>> {
    let n = evaluator.num_bands();
    let space = count_combinations(n as u64, cfg.k as u64)?;
    if cfg.n0 > cfg.budget || cfg.budget as u64 > space {
        return Err(Error::invalid(format!(
            "need n0 <= budget <= |space|, got {} / {} / {space}",
            cfg.n0, cfg.budget
        )));
    }
    if cfg.eval_seeds.is_empty() {
        return Err(Error::invalid("no evaluation seeds"));
    }
    let mut sampler = PrefixSampler::new(space, cfg.seed);
    let initial_ranks = sampler.draw(cfg.n0 as u64);
    let mut out = initial_ranks
        .iter()
        .map(|&r| unrank_combination(n, cfg.k, r))
        .collect::<Result<Vec<_>>>()?;
    if cfg.budget == cfg.n0 {
        return Ok(out);
    }

    let task = evaluator.task();
    let metric = task.primary_metric;
    let direction = task.direction(metric)?;
    let samples = crate::parallel::install(|| {
        out.par_iter()
            .map(|bc| {
                let mut total = 0.0;
                for &s in &cfg.eval_seeds {
                    total += evaluator.evaluate(bc, s)?[metric];
                }
                Ok((bc.clone(), total / cfg.eval_seeds.len() as f64))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let model = surrogate::fit(&samples, n, stats, &cfg.surrogate)?;

    let taken: HashSet<u64> = initial_ranks.into_iter().collect();
    let mut scored = crate::parallel::install(|| {
        (0..space)
            .into_par_iter()
            .filter(|r| !taken.contains(r))
            .map(|r| {
                let bc = unrank_combination(n, cfg.k, r)?;
                let pred = surrogate::predict(&model, &bc, n, stats)?;
                Ok((direction.utility(pred), bc))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    out.extend(scored.into_iter().take(cfg.budget - cfg.n0).map(|(_, bc)| bc));
    Ok(out)
}
