//! Generational genetic search over band sets.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Objective, Run, SearchResult, SearchSpace};
use crate::error::{Error, Result};
use crate::hsi::BandCombination;
use crate::sampling::PrefixSampler;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneticConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    /// Probability that a child has one band swapped for an outsider.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GeneticConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 20,
            tournament: 3,
            mutation_rate: 0.3,
            seed: 0,
        }
    }
}

impl GeneticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::invalid("population must be at least 2"));
        }
        if self.tournament == 0 {
            return Err(Error::invalid("tournament size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::invalid(format!("mutation rate {} outside [0, 1]", self.mutation_rate)));
        }
        Ok(())
    }
}

/// Genetic search from a random initial population of distinct combinations
/// (repeats only when the space is smaller than the population).
pub fn genetic(objective: Objective<'_>, space: &SearchSpace, cfg: &GeneticConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let size = space.len();
    let ranks = PrefixSampler::new(size, cfg.seed).draw(cfg.population as u64);
    let population = (0..cfg.population)
        .map(|i| space.get(ranks[i % ranks.len()]))
        .collect::<Result<Vec<_>>>()?;
    genetic_from_population(objective, space, cfg, population)
}

/// Genetic search from a caller-supplied initial population.
pub fn genetic_from_population(
    objective: Objective<'_>,
    space: &SearchSpace,
    cfg: &GeneticConfig,
    mut population: Vec<BandCombination>,
) -> Result<SearchResult> {
    cfg.validate()?;
    if space.is_explicit() {
        return Err(Error::invalid("genetic search needs the full combination space"));
    }
    if population.len() != cfg.population {
        return Err(Error::invalid(format!(
            "initial population has {} members, expected {}",
            population.len(),
            cfg.population
        )));
    }
    let (n, k) = (space.num_bands(), space.k());
    for bc in &population {
        bc.check_bands(n)?;
        if bc.len() != k {
            return Err(Error::invalid(format!("{bc} does not have {k} bands")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut run = Run::new(objective);
    let mut fitness: Vec<f64> = run.score_many(&population)?.into_iter().map(|v| run.utility(v)).collect();

    let better = |a: usize, b: usize, pop: &[BandCombination], fit: &[f64]| {
        fit[a] > fit[b] || (fit[a] == fit[b] && pop[a] < pop[b])
    };

    for _ in 0..cfg.generations {
        let elite = (1..population.len()).fold(0, |e, i| if better(i, e, &population, &fitness) { i } else { e });
        let mut next = vec![population[elite].clone()];
        while next.len() < cfg.population {
            let mut pick = || {
                let mut best = rng.random_range(0..population.len());
                for _ in 1..cfg.tournament {
                    let c = rng.random_range(0..population.len());
                    if better(c, best, &population, &fitness) {
                        best = c;
                    }
                }
                best
            };
            let (p1, p2) = (pick(), pick());
            let mut pool: Vec<usize> = population[p1].indices().to_vec();
            pool.extend(population[p2].indices().iter().filter(|b| !population[p1].contains(**b)));
            let mut child: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
            if k < n && rng.random_bool(cfg.mutation_rate) {
                let outside: Vec<usize> = (0..n).filter(|b| !child.contains(b)).collect();
                let slot = rng.random_range(0..k);
                child[slot] = outside[rng.random_range(0..outside.len())];
            }
            next.push(BandCombination::from_unsorted(child)?);
        }
        fitness = run.score_many(&next)?.into_iter().map(|v| run.utility(v)).collect();
        population = next;
    }
    run.finish("ga")
}
