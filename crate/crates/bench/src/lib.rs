//! Fixtures shared by the benchmarks.

use bss_core::benchtable::{build_table, BenchTable, Classifier, ClassificationEvaluator};
use bss_core::hsi::synth::{gen_synth_classification, SynthConfig};
use bss_core::search::SearchSpace;
use bss_core::{HsiCube, LabelMap};

pub const BANDS: usize = 16;
pub const K: usize = 3;

pub fn scene(seed: u64) -> (HsiCube, LabelMap) {
    let (cube, labels, _) = gen_synth_classification(&SynthConfig { seed, ..Default::default() }).unwrap();
    (cube, labels)
}

pub fn evaluator(seed: u64) -> ClassificationEvaluator {
    let (cube, labels) = scene(seed);
    ClassificationEvaluator::new(&cube, &labels, Classifier::NearestCentroid, "bench").unwrap()
}

pub fn space() -> SearchSpace {
    SearchSpace::new(BANDS, K).unwrap()
}

/// The exhaustive 560-entry nearest-centroid table of scene `seed`.
pub fn table(seed: u64) -> BenchTable {
    build_table(&evaluator(seed), &space().all().unwrap(), &[0]).unwrap()
}
