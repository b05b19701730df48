//! Band-selection search over an [`Evaluator`].
//!
//! Every algorithm works against an [`Objective`] (evaluator, metric and
//! evaluation seed) and records each distinct combination it evaluates in
//! a trace. Repeated visits are served from a per-run cache, so
//! `evaluations` counts unique evaluator calls. Ties are always broken
//! towards the lexicographically smaller band list.

mod genetic;
mod predictor;
mod sffs;

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchtable::Evaluator;
use crate::error::{Error, Result};
use crate::hsi::{count_combinations, unrank_combination, BandCombination, Direction};
use crate::sampling::PrefixSampler;
use crate::stats::BandStats;

pub use genetic::{genetic, genetic_from_population, GeneticConfig};
pub use predictor::{predictor_search, predictor_search_with, PredictorConfig};
pub use sffs::{sffs, SffsConfig};

/// Default cap on the number of combinations an exhaustive scan may visit.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 2_000_000;

/// All `k`-subsets of `n` bands, or an explicit candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    num_bands: usize,
    k: usize,
    candidates: Option<Vec<BandCombination>>,
}

impl SearchSpace {
    pub fn new(num_bands: usize, k: usize) -> Result<Self> {
        if k == 0 || k > num_bands {
            return Err(Error::invalid(format!("cannot select {k} of {num_bands} bands")));
        }
        count_combinations(num_bands as u64, k as u64)?;
        Ok(Self {
            num_bands,
            k,
            candidates: None,
        })
    }

    pub fn explicit(num_bands: usize, candidates: Vec<BandCombination>) -> Result<Self> {
        let k = candidates
            .first()
            .map(BandCombination::len)
            .ok_or_else(|| Error::invalid("empty candidate list"))?;
        let mut seen = std::collections::HashSet::new();
        for bc in &candidates {
            bc.check_bands(num_bands)?;
            if bc.len() != k {
                return Err(Error::invalid("candidates differ in size"));
            }
            if !seen.insert(bc) {
                return Err(Error::Duplicate(bc.clone()));
            }
        }
        Ok(Self {
            num_bands,
            k,
            candidates: Some(candidates),
        })
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_explicit(&self) -> bool {
        self.candidates.is_some()
    }

    pub fn len(&self) -> u64 {
        match &self.candidates {
            Some(c) => c.len() as u64,
            None => count_combinations(self.num_bands as u64, self.k as u64).expect("checked in new"),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The combination at `index`; lexicographic order for implicit spaces.
    pub fn get(&self, index: u64) -> Result<BandCombination> {
        match &self.candidates {
            Some(c) => c
                .get(index as usize)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("candidate index {index} out of range"))),
            None => unrank_combination(self.num_bands, self.k, index),
        }
    }

    pub fn all(&self) -> Result<Vec<BandCombination>> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }
}

/// What a search optimizes: one metric of an evaluator at a fixed seed.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub evaluator: &'a dyn Evaluator,
    pub metric: &'a str,
    pub direction: Direction,
    pub eval_seed: u64,
}

impl<'a> Objective<'a> {
    pub fn new(evaluator: &'a dyn Evaluator, metric: &'a str, eval_seed: u64) -> Result<Self> {
        let direction = evaluator.task().direction(metric)?;
        Ok(Self {
            evaluator,
            metric,
            direction,
            eval_seed,
        })
    }

    /// Objective on the evaluator's primary metric.
    pub fn primary(evaluator: &'a dyn Evaluator, eval_seed: u64) -> Self {
        let metric = evaluator.task().primary_metric;
        Self::new(evaluator, metric, eval_seed).expect("primary metric is always defined")
    }

    fn value(&self, bc: &BandCombination) -> Result<f64> {
        let metrics = self.evaluator.evaluate(bc, self.eval_seed)?;
        metrics
            .get(self.metric)
            .copied()
            .ok_or_else(|| Error::invalid(format!("evaluator did not report {}", self.metric)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub bands: BandCombination,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algorithm: String,
    pub best: BandCombination,
    /// Metric value of `best`.
    pub score: f64,
    /// Unique evaluator calls.
    pub evaluations: usize,
    pub seconds: f64,
    /// Every distinct evaluation in the order it was made.
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    /// Writes the trace as CSV with header `bands,score`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("bands,score\n");
        for t in &self.trace {
            out.push_str(&format!("{},{}\n", t.bands, t.score));
        }
        out
    }
}

/// One search run: memoized scoring plus the evaluation trace.
pub(crate) struct Run<'a> {
    objective: Objective<'a>,
    cache: HashMap<BandCombination, f64>,
    trace: Vec<TraceEntry>,
    start: Instant,
}

impl<'a> Run<'a> {
    pub(crate) fn new(objective: Objective<'a>) -> Self {
        Self {
            objective,
            cache: HashMap::new(),
            trace: Vec::new(),
            start: Instant::now(),
        }
    }

    pub(crate) fn direction(&self) -> Direction {
        self.objective.direction
    }

    pub(crate) fn utility(&self, value: f64) -> f64 {
        self.objective.direction.utility(value)
    }

    /// Scores a batch, evaluating unseen combinations concurrently. Trace
    /// order follows the batch order.
    pub(crate) fn score_many(&mut self, bcs: &[BandCombination]) -> Result<Vec<f64>> {
        let mut fresh: Vec<&BandCombination> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for bc in bcs {
            if !self.cache.contains_key(bc) && queued.insert(bc) {
                fresh.push(bc);
            }
        }
        let objective = self.objective;
        let values = crate::parallel::install(|| {
            fresh
                .par_iter()
                .map(|bc| {
                    objective.value(bc).map_err(|e| Error::Evaluation {
                        bands: (*bc).clone(),
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (bc, v) in fresh.into_iter().zip(values) {
            self.cache.insert(bc.clone(), v);
            self.trace.push(TraceEntry {
                bands: bc.clone(),
                score: v,
            });
        }
        Ok(bcs.iter().map(|bc| self.cache[bc]).collect())
    }

    pub(crate) fn score(&mut self, bc: &BandCombination) -> Result<f64> {
        Ok(self.score_many(std::slice::from_ref(bc))?[0])
    }

    pub(crate) fn finish(self, algorithm: &str) -> Result<SearchResult> {
        let direction = self.objective.direction;
        let best = self
            .trace
            .iter()
            .reduce(|best, t| {
                let (u, ub) = (direction.utility(t.score), direction.utility(best.score));
                if u > ub || (u == ub && t.bands < best.bands) {
                    t
                } else {
                    best
                }
            })
            .ok_or_else(|| Error::invalid("search made no evaluations"))?
            .clone();
        Ok(SearchResult {
            algorithm: algorithm.to_string(),
            best: best.bands,
            score: best.score,
            evaluations: self.trace.len(),
            seconds: self.start.elapsed().as_secs_f64(),
            trace: self.trace,
        })
    }
}

/// Evaluates every combination in the space.
pub fn exhaustive(objective: Objective<'_>, space: &SearchSpace, cap: u64) -> Result<SearchResult> {
    let size = space.len();
    if size > cap {
        return Err(Error::SpaceTooLarge { size, cap });
    }
    let mut run = Run::new(objective);
    run.score_many(&space.all()?)?;
    run.finish("exhaustive")
}

/// Best of `m` distinct uniform draws (all of the space if `m` exceeds it).
///
/// Draws come from a prefix-consistent sampler, so for a fixed seed a larger
/// `m` sees a superset of the combinations a smaller `m` sees.
pub fn random_search(objective: Objective<'_>, space: &SearchSpace, m: u64, seed: u64) -> Result<SearchResult> {
    if m == 0 {
        return Err(Error::invalid("random search needs m >= 1"));
    }
    let draws = PrefixSampler::new(space.len(), seed).draw(m);
    let bcs = draws.into_iter().map(|i| space.get(i)).collect::<Result<Vec<_>>>()?;
    let mut run = Run::new(objective);
    run.score_many(&bcs)?;
    run.finish("random")
}

/// Ranks the whole space by a blend of min-max normalized mean entropy
/// (weight `alpha`) and mean pairwise spectral angle (weight `1 - alpha`),
/// then evaluates the top `m`.
pub fn stats_ranked_search(
    objective: Objective<'_>,
    stats: &BandStats,
    space: &SearchSpace,
    m: u64,
    alpha: f64,
) -> Result<SearchResult> {
    if m == 0 {
        return Err(Error::invalid("stats-ranked search needs m >= 1"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("blend weight {alpha} must be in [0, 1]")));
    }
    if stats.num_bands() != space.num_bands() {
        return Err(Error::shape("band statistics do not match the search space"));
    }
    if space.len() > DEFAULT_EXHAUSTIVE_CAP {
        return Err(Error::SpaceTooLarge {
            size: space.len(),
            cap: DEFAULT_EXHAUSTIVE_CAP,
        });
    }
    let all = space.all()?;
    let ent: Vec<f64> = all.iter().map(|bc| stats.bc_entropy(bc)).collect();
    let sam: Vec<f64> = all.iter().map(|bc| stats.bc_sam(bc)).collect();
    let normalize = |v: &[f64]| -> Vec<f64> {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
    };
    let (ent, sam) = (normalize(&ent), normalize(&sam));
    let mut ranked: Vec<(f64, BandCombination)> = all
        .into_iter()
        .enumerate()
        .map(|(i, bc)| (alpha * ent[i] + (1.0 - alpha) * sam[i], bc))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let top: Vec<BandCombination> = ranked.into_iter().take(m as usize).map(|(_, bc)| bc).collect();
    let mut run = Run::new(objective);
    run.score_many(&top)?;
    run.finish("stats")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hsi::{MetricMap, TaskKind, TaskSpec, OA};

    /// Score = sum of fixed per-band utilities, reported as OA.
    pub(crate) struct Additive {
        pub utilities: Vec<f64>,
        pub task: TaskSpec,
    }

    impl Additive {
        pub(crate) fn new(utilities: Vec<f64>) -> Self {
            Self {
                utilities,
                task: TaskSpec::new(TaskKind::Classification),
            }
        }
    }

    impl Evaluator for Additive {
        fn task(&self) -> &TaskSpec {
            &self.task
        }
        fn num_bands(&self) -> usize {
            self.utilities.len()
        }
        fn dataset_id(&self) -> &str {
            "additive"
        }
        fn backbone_id(&self) -> &str {
            "sum"
        }
        fn evaluate(&self, bc: &BandCombination, _seed: u64) -> Result<MetricMap> {
            let s: f64 = bc.indices().iter().map(|&b| self.utilities[b]).sum();
            Ok(MetricMap::from([(OA.into(), s), ("AA".into(), s), ("Kappa".into(), s)]))
        }
    }

    #[test]
    fn exhaustive_counts_and_cap() {
        let eval = Additive::new(vec![0.1, 0.4, 0.3, 0.2]);
        let obj = Objective::primary(&eval, 0);
        let space = SearchSpace::new(4, 3).unwrap();
        let r = exhaustive(obj, &space, 100).unwrap();
        assert_eq!(r.evaluations, 4);
        assert_eq!(r.best.indices(), &[1, 2, 3]);
        assert!(matches!(exhaustive(obj, &space, 3), Err(Error::SpaceTooLarge { size: 4, cap: 3 })));
    }

    #[test]
    fn single_candidate_space() {
        let eval = Additive::new(vec![0.1, 0.4, 0.3, 0.2]);
        let bc = BandCombination::new(vec![0, 2]).unwrap();
        let space = SearchSpace::explicit(4, vec![bc.clone()]).unwrap();
        let r = exhaustive(Objective::primary(&eval, 0), &space, 10).unwrap();
        assert_eq!(r.best, bc);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let eval = Additive::new(vec![1.0, 1.0, 1.0, 1.0]);
        let r = exhaustive(Objective::primary(&eval, 0), &SearchSpace::new(4, 2).unwrap(), 100).unwrap();
        assert_eq!(r.best.indices(), &[0, 1]);
    }

    #[test]
    fn random_search_edges() {
        let eval = Additive::new((0..8).map(|i| (i * 37 % 11) as f64).collect());
        let obj = Objective::primary(&eval, 0);
        let space = SearchSpace::new(8, 3).unwrap();
        let full = random_search(obj, &space, 1000, 3).unwrap();
        let ex = exhaustive(obj, &space, 1000).unwrap();
        assert_eq!(full.evaluations, 56);
        assert_eq!((full.best.clone(), full.score), (ex.best, ex.score));
        let one = random_search(obj, &space, 1, 3).unwrap();
        assert_eq!(one.evaluations, 1);
        assert_eq!(one.best, one.trace[0].bands);
        assert!(random_search(obj, &space, 0, 3).is_err());
    }

    #[test]
    fn stats_ranked_full_space_equals_exhaustive() {
        use crate::hsi::synth::{gen_synth_classification, SynthConfig};
        let (cube, _, _) = gen_synth_classification(&SynthConfig { num_bands: 8, side: 8, informative: 2, ..Default::default() }).unwrap();
        let stats = BandStats::compute(&cube).unwrap();
        let eval = Additive::new((0..8).map(|i| ((i * 5) % 7) as f64).collect());
        let obj = Objective::primary(&eval, 0);
        let space = SearchSpace::new(8, 3).unwrap();
        let r = stats_ranked_search(obj, &stats, &space, 56, 0.5).unwrap();
        let ex = exhaustive(obj, &space, 100).unwrap();
        assert_eq!(r.best, ex.best);

        // alpha = 1 ranks purely by entropy
        let top = stats_ranked_search(obj, &stats, &space, 1, 1.0).unwrap();
        let best_entropy = space
            .all()
            .unwrap()
            .into_iter()
            .max_by(|a, b| stats.bc_entropy(a).total_cmp(&stats.bc_entropy(b)).then_with(|| b.cmp(a)))
            .unwrap();
        assert_eq!(top.best, best_entropy);
    }

    #[test]
    fn explicit_space_validation() {
        let a = BandCombination::new(vec![0, 1]).unwrap();
        assert!(SearchSpace::explicit(4, vec![]).is_err());
        assert!(SearchSpace::explicit(4, vec![a.clone(), a.clone()]).is_err());
        assert!(SearchSpace::explicit(1, vec![a]).is_err());
        assert!(SearchSpace::new(4, 0).is_err());
        assert!(SearchSpace::new(4, 5).is_err());
        assert_eq!(SearchSpace::new(4, 4).unwrap().len(), 1);
    }
}
