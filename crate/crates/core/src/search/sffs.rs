//! Sequential floating forward selection.
//!
//! The evaluator only scores full-size combinations, so a partial subset is
//! scored by the mean utility of a few seeded random completions to size K
//! (all completions when there are no more than that).

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Objective, Run, SearchResult, SearchSpace};
use crate::error::{Error, Result};
use crate::hsi::{count_combinations, unrank_combination, BandCombination};
use crate::sampling::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SffsConfig {
    /// Random completions averaged when scoring a partial subset.
    pub completions: usize,
    pub seed: u64,
}

impl Default for SffsConfig {
    fn default() -> Self {
        Self { completions: 8, seed: 0 }
    }
}

struct Sffs<'r, 'a> {
    run: &'r mut Run<'a>,
    n: usize,
    k: usize,
    cfg: &'r SffsConfig,
}

impl Sffs<'_, '_> {
    fn completions(&self, subset: &[usize]) -> Result<Vec<BandCombination>> {
        let outside: Vec<usize> = (0..self.n).filter(|b| !subset.contains(b)).collect();
        let need = self.k - subset.len();
        if need == 0 {
            return Ok(vec![BandCombination::new(subset.to_vec())?]);
        }
        let total = count_combinations(outside.len() as u64, need as u64)?;
        let extend = |pick: Vec<usize>| {
            let mut bands = subset.to_vec();
            bands.extend(pick.into_iter().map(|i| outside[i]));
            BandCombination::from_unsorted(bands)
        };
        if total <= self.cfg.completions as u64 {
            return (0..total)
                .map(|r| extend(unrank_combination(outside.len(), need, r)?.indices().to_vec()))
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, subset));
        (0..self.cfg.completions)
            .map(|_| extend(index::sample(&mut rng, outside.len(), need).into_vec()))
            .collect()
    }

    /// Scores several sorted subsets, batching all evaluator calls.
    fn criterion(&mut self, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
        let groups = subsets
            .iter()
            .map(|s| self.completions(s))
            .collect::<Result<Vec<_>>>()?;
        let flat: Vec<BandCombination> = groups.iter().flatten().cloned().collect();
        let values = self.run.score_many(&flat)?;
        let mut out = Vec::with_capacity(groups.len());
        let mut at = 0;
        for g in &groups {
            let u: f64 = values[at..at + g.len()].iter().map(|&v| self.run.utility(v)).sum();
            out.push(u / g.len() as f64);
            at += g.len();
        }
        Ok(out)
    }

    /// Best of several subsets by criterion; ties go to the lexicographically
    /// smaller subset.
    fn best_of(&mut self, subsets: Vec<Vec<usize>>) -> Result<(Vec<usize>, f64)> {
        let scores = self.criterion(&subsets)?;
        let mut best: Option<(Vec<usize>, f64)> = None;
        for (s, j) in subsets.into_iter().zip(scores) {
            let better = match &best {
                None => true,
                Some((bs, bj)) => j > *bj || (j == *bj && s < *bs),
            };
            if better {
                best = Some((s, j));
            }
        }
        best.ok_or_else(|| Error::invalid("no candidate subsets"))
    }
}

fn with(subset: &[usize], band: usize) -> Vec<usize> {
    let mut s = subset.to_vec();
    s.push(band);
    s.sort_unstable();
    s
}

fn without(subset: &[usize], band: usize) -> Vec<usize> {
    subset.iter().copied().filter(|&b| b != band).collect()
}

/// Deterministic for a fixed configuration. The result is the best full-size
/// combination evaluated along the way, which includes the final subset.
pub fn sffs(objective: Objective<'_>, space: &SearchSpace, cfg: &SffsConfig) -> Result<SearchResult> {
    if space.is_explicit() {
        return Err(Error::invalid("sequential selection needs the full combination space"));
    }
    if cfg.completions == 0 {
        return Err(Error::invalid("need at least one completion per partial subset"));
    }
    let (n, k) = (space.num_bands(), space.k());
    let mut run = Run::new(objective);
    let mut search = Sffs { run: &mut run, n, k, cfg };
    let mut best_by_size = vec![f64::NEG_INFINITY; k + 1];
    let mut subset: Vec<usize> = Vec::new();
    // Each accepted removal strictly raises some best_by_size entry, so the
    // loop terminates; the step cap only guards against float oddities.
    let mut steps = 0usize;
    let max_steps = 4 * n * k + 16;
    while subset.len() < k && steps < max_steps {
        steps += 1;
        let adds: Vec<Vec<usize>> = (0..n).filter(|b| !subset.contains(b)).map(|b| with(&subset, b)).collect();
        let (grown, j) = search.best_of(adds)?;
        subset = grown;
        let size = subset.len();
        best_by_size[size] = best_by_size[size].max(j);
        while subset.len() > 2 {
            let removals: Vec<Vec<usize>> = subset.iter().map(|&b| without(&subset, b)).collect();
            let (shrunk, j) = search.best_of(removals)?;
            if j > best_by_size[shrunk.len()] {
                best_by_size[shrunk.len()] = j;
                subset = shrunk;
            } else {
                break;
            }
        }
    }
    if subset.len() == k {
        run.score(&BandCombination::new(subset)?)?;
    }
    run.finish("sffs")
}
