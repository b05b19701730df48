//! The benchmark table: band combinations mapped to per-seed metrics, with
//! construction, seed-averaged queries, oracle/regret computation and
//! cross-table analyses.

mod analysis;
pub mod evaluator;
mod expand;
mod file;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hsi::{BandCombination, MetricMap, TaskKind, TaskSpec};

pub use analysis::{rank_correlation, spearman, top_overlap, top_set};
pub use evaluator::{
    split_pixels, Classifier, ClassificationEvaluator, Evaluator, ReconstructionEvaluator, TableEvaluator,
    DEFAULT_VAL_FRACTION,
};
pub use expand::{predict_and_expand, ExpandConfig};
pub use file::{load_table, parse_table, render_table, save_table};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BenchKey {
    pub task: TaskKind,
    pub dataset_id: String,
    pub backbone_id: String,
    pub bands: BandCombination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub key: BenchKey,
    pub seeds: BTreeMap<u64, MetricMap>,
    pub cost_seconds: f64,
}

impl BenchRecord {
    /// Arithmetic mean of each metric across seeds.
    pub fn mean(&self) -> MetricMap {
        let mut out = MetricMap::new();
        for metrics in self.seeds.values() {
            for (name, v) in metrics {
                *out.entry(name.clone()).or_insert(0.0) += v;
            }
        }
        let n = self.seeds.len() as f64;
        out.values_mut().for_each(|v| *v /= n);
        out
    }
}

/// An immutable set of records for one task, dataset and backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    task: TaskSpec,
    dataset_id: String,
    backbone_id: String,
    records: BTreeMap<BandCombination, BenchRecord>,
}

impl BenchTable {
    /// Validates and indexes records. Insertion order does not matter.
    pub fn from_records(records: impl IntoIterator<Item = BenchRecord>) -> Result<Self> {
        let mut iter = records.into_iter().peekable();
        let first = iter.peek().ok_or_else(|| Error::invalid("benchmark table has no records"))?;
        let task = TaskSpec::new(first.key.task);
        let dataset_id = first.key.dataset_id.clone();
        let backbone_id = first.key.backbone_id.clone();
        let mut map = BTreeMap::new();
        for record in iter {
            let key = &record.key;
            if key.task != task.kind || key.dataset_id != dataset_id || key.backbone_id != backbone_id {
                return Err(Error::invalid(format!(
                    "record {} ({}/{}/{}) does not belong to table {}/{dataset_id}/{backbone_id}",
                    key.bands, key.task, key.dataset_id, key.backbone_id, task.kind
                )));
            }
            validate_metrics(&task, &record)?;
            if map.insert(key.bands.clone(), record.clone()).is_some() {
                return Err(Error::Duplicate(record.key.bands));
            }
        }
        Ok(Self {
            task,
            dataset_id,
            backbone_id,
            records: map,
        })
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn backbone_id(&self) -> &str {
        &self.backbone_id
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in lexicographic band order.
    pub fn records(&self) -> impl Iterator<Item = &BenchRecord> {
        self.records.values()
    }

    pub fn band_combinations(&self) -> impl Iterator<Item = &BandCombination> {
        self.records.keys()
    }

    pub fn record(&self, bands: &BandCombination) -> Option<&BenchRecord> {
        self.records.get(bands)
    }

    pub fn key_for(&self, bands: BandCombination) -> BenchKey {
        BenchKey {
            task: self.task.kind,
            dataset_id: self.dataset_id.clone(),
            backbone_id: self.backbone_id.clone(),
            bands,
        }
    }

    /// Seed-averaged metrics for `key`.
    pub fn query(&self, key: &BenchKey) -> Result<MetricMap> {
        match self.records.get(&key.bands) {
            Some(record) if &record.key == key => Ok(record.mean()),
            _ => Err(Error::NotFound(format!(
                "{}/{}/{}/{}",
                key.task, key.dataset_id, key.backbone_id, key.bands
            ))),
        }
    }

    /// Seed-averaged metrics for a band combination of this table.
    pub fn query_bands(&self, bands: &BandCombination) -> Result<MetricMap> {
        self.records
            .get(bands)
            .map(BenchRecord::mean)
            .ok_or_else(|| Error::NotFound(format!("bands {bands}")))
    }

    /// Seed-averaged value of one metric.
    pub fn value(&self, bands: &BandCombination, metric: &str) -> Result<f64> {
        self.task.direction(metric)?;
        Ok(self.query_bands(bands)?[metric])
    }

    /// `(bands, seed-averaged value)` for every record, in band order.
    pub fn values(&self, metric: &str) -> Result<Vec<(BandCombination, f64)>> {
        self.task.direction(metric)?;
        Ok(self
            .records
            .iter()
            .map(|(bc, r)| (bc.clone(), r.mean()[metric]))
            .collect())
    }

    /// Band combinations sorted best-first, ties broken by band order.
    pub fn ranked(&self, metric: &str) -> Result<Vec<(BandCombination, f64)>> {
        let direction = self.task.direction(metric)?;
        let mut values = self.values(metric)?;
        values.sort_by(|a, b| {
            direction
                .utility(b.1)
                .total_cmp(&direction.utility(a.1))
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(values)
    }

    /// Number of combinations strictly better than `bands` under `metric`.
    pub fn strictly_better_count(&self, bands: &BandCombination, metric: &str) -> Result<usize> {
        let direction = self.task.direction(metric)?;
        let target = direction.utility(self.value(bands, metric)?);
        Ok(self
            .values(metric)?
            .iter()
            .filter(|(_, v)| direction.utility(*v) > target)
            .count())
    }
}

fn validate_metrics(task: &TaskSpec, record: &BenchRecord) -> Result<()> {
    if record.seeds.is_empty() {
        return Err(Error::invalid(format!("record {} has no seeds", record.key.bands)));
    }
    for (seed, metrics) in &record.seeds {
        if let Some(missing) = task.metrics().find(|m| !metrics.contains_key(*m)) {
            return Err(Error::invalid(format!(
                "record {} seed {seed} is missing metric {missing:?}",
                record.key.bands
            )));
        }
        if let Some(extra) = metrics.keys().find(|m| task.direction(m).is_err()) {
            return Err(Error::invalid(format!(
                "record {} seed {seed} has unknown metric {extra:?}",
                record.key.bands
            )));
        }
    }
    Ok(())
}

/// Evaluates every combination under every seed. Combinations are
/// evaluated in parallel; the table does not depend on scheduling.
pub fn build_table<E: Evaluator + ?Sized>(evaluator: &E, bcs: &[BandCombination], seeds: &[u64]) -> Result<BenchTable> {
    if bcs.is_empty() {
        return Err(Error::invalid("no band combinations to evaluate"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for bc in bcs {
        if !seen.insert(bc) {
            return Err(Error::Duplicate(bc.clone()));
        }
    }
    let distinct_seeds: std::collections::BTreeSet<_> = seeds.iter().collect();
    if distinct_seeds.len() != seeds.len() {
        return Err(Error::invalid("duplicate seeds"));
    }
    let task = evaluator.task().kind;
    let records = crate::parallel::install(|| {
        bcs.par_iter()
            .map(|bc| {
                let start = Instant::now();
                let per_seed = seeds
                    .iter()
                    .map(|&s| {
                        evaluator.evaluate(bc, s).map(|m| (s, m)).map_err(|e| Error::Evaluation {
                            bands: bc.clone(),
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Ok(BenchRecord {
                    key: BenchKey {
                        task,
                        dataset_id: evaluator.dataset_id().to_string(),
                        backbone_id: evaluator.backbone_id().to_string(),
                        bands: bc.clone(),
                    },
                    seeds: per_seed,
                    cost_seconds: start.elapsed().as_secs_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    BenchTable::from_records(records)
}

/// Best combination under `metric`, ties resolved to the smallest bands.
pub fn oracle(table: &BenchTable, metric: &str) -> Result<(BandCombination, f64)> {
    let direction = table.task.direction(metric)?;
    let mut best: Option<(BandCombination, f64)> = None;
    for (bc, record) in &table.records {
        let v = record.mean()[metric];
        // strict comparison keeps the lexicographically first of any tie
        if best.as_ref().is_none_or(|(_, b)| direction.utility(v) > direction.utility(*b)) {
            best = Some((bc.clone(), v));
        }
    }
    best.ok_or_else(|| Error::invalid("empty table has no oracle"))
}

/// Gap between the oracle and `bands` under `metric`; zero means optimal.
pub fn regret(table: &BenchTable, bands: &BandCombination, metric: &str) -> Result<f64> {
    let direction = table.task.direction(metric)?;
    let value = table.value(bands, metric)?;
    let (_, best) = oracle(table, metric)?;
    Ok(direction.utility(best) - direction.utility(value))
}
