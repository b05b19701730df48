//! Surrogate-guided search: evaluate a random sample, fit a predictor, then
//! evaluate the candidates it rates highest.

use super::{Objective, Run, SearchResult, SearchSpace};
use crate::error::{Error, Result};
use crate::hsi::BandCombination;
use crate::sampling::PrefixSampler;
use crate::stats::BandStats;
use crate::surrogate::{self, SurrogateConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    /// Randomly drawn combinations evaluated to train the surrogate.
    pub n_train: usize,
    /// Further random combinations ranked by the surrogate.
    pub n_rank: usize,
    /// Top-ranked combinations evaluated for real.
    pub top_t: usize,
    pub surrogate: SurrogateConfig,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            n_train: 100,
            n_rank: 1000,
            top_t: 20,
            surrogate: SurrogateConfig::default(),
            seed: 0,
        }
    }
}

/// Predictor search with the configured surrogate, optionally using band
/// statistics as extra features.
pub fn predictor_search(
    objective: Objective<'_>,
    space: &SearchSpace,
    cfg: &PredictorConfig,
    stats: Option<&BandStats>,
) -> Result<SearchResult> {
    let n = space.num_bands();
    predictor_search_with(objective, space, cfg, |train| {
        let model = surrogate::fit(train, n, stats, &cfg.surrogate)?;
        Ok(move |bc: &BandCombination| surrogate::predict(&model, bc, n, stats))
    })
}

/// Predictor search with a custom predictor. `fit` receives the evaluated
/// training sample as `(bands, metric value)` and returns a function giving
/// a predicted metric value.
pub fn predictor_search_with<F, P>(
    objective: Objective<'_>,
    space: &SearchSpace,
    cfg: &PredictorConfig,
    fit: F,
) -> Result<SearchResult>
where
    F: FnOnce(&[(BandCombination, f64)]) -> Result<P>,
    P: Fn(&BandCombination) -> Result<f64>,
{
    if cfg.n_train == 0 {
        return Err(Error::invalid("predictor search needs n_train >= 1"));
    }
    if cfg.top_t > cfg.n_rank {
        return Err(Error::invalid(format!("top_t {} exceeds n_rank {}", cfg.top_t, cfg.n_rank)));
    }
    if (cfg.n_train + cfg.top_t) as u64 > space.len() {
        return Err(Error::invalid(format!(
            "n_train + top_t = {} exceeds the space size {}",
            cfg.n_train + cfg.top_t,
            space.len()
        )));
    }
    let mut sampler = PrefixSampler::new(space.len(), cfg.seed);
    let to_bcs = |ranks: Vec<u64>| ranks.into_iter().map(|r| space.get(r)).collect::<Result<Vec<_>>>();
    let train = to_bcs(sampler.draw(cfg.n_train as u64))?;
    let mut run = Run::new(objective);
    let values = run.score_many(&train)?;
    if cfg.top_t == 0 {
        return run.finish("predictor");
    }
    let samples: Vec<(BandCombination, f64)> = train.into_iter().zip(values).collect();
    let predict = fit(&samples)?;
    let direction = run.direction();
    let mut ranked = to_bcs(sampler.draw(cfg.n_rank as u64))?
        .into_iter()
        .map(|bc| Ok((direction.utility(predict(&bc)?), bc)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let top: Vec<BandCombination> = ranked.into_iter().take(cfg.top_t).map(|(_, bc)| bc).collect();
    run.score_many(&top)?;
    run.finish("predictor")
}
