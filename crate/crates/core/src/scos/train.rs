//! One-shot training, inference-only evaluation and search, fine-tuning and
//! gradient checking.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{forward, loss_and_grad, loss_value, pool, Head, Loss, ModelShape, PeKind, SupernetParams};
use super::patch::{Sample, ScosData};
use crate::benchtable::Evaluator;
use crate::error::{Error, Result};
use crate::hsi::metrics::{classification_scores, reconstruction_metrics};
use crate::hsi::{count_combinations, unrank_combination, BandCombination, MetricMap, TaskKind, TaskSpec};
use crate::search::{random_search, Objective, SearchResult, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScosTrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Side length of the square input patches.
    pub patch_size: usize,
    pub k: usize,
    pub val_fraction: f64,
    /// Width of the classifier's shared layer.
    pub hidden: usize,
    pub pe_kind: PeKind,
    /// Rescales a step's gradient to at most this global norm; 0 disables.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for ScosTrainConfig {
    fn default() -> Self {
        Self {
            iterations: 6000,
            batch_size: 32,
            learning_rate: 0.05,
            patch_size: 7,
            k: 3,
            val_fraction: 0.5,
            hidden: 32,
            pe_kind: PeKind::Slpe,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl ScosTrainConfig {
    /// Iterations, patch size, batch size and learning rate of the
    /// full-size transformer backbones (those used Adam-type optimizers).
    pub fn full_scale(task: TaskKind) -> Self {
        match task {
            TaskKind::Classification => Self {
                iterations: 320_000,
                patch_size: 13,
                batch_size: 64,
                learning_rate: 1e-3,
                ..Self::default()
            },
            TaskKind::Reconstruction => Self {
                iterations: 50_000,
                patch_size: 32,
                batch_size: 128,
                learning_rate: 4e-4,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self, num_bands: usize) -> Result<()> {
        if self.batch_size == 0 || self.patch_size == 0 || self.k == 0 || self.hidden == 0 {
            return Err(Error::invalid("batch size, patch size, K and hidden width must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::invalid(format!("gradient clip {} must be finite and >= 0", self.grad_clip)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid(format!("validation fraction {} must be in (0, 1)", self.val_fraction)));
        }
        if self.k >= num_bands {
            return Err(Error::invalid(format!("K={} must be below N={num_bands}", self.k)));
        }
        Ok(())
    }

    pub fn shape(&self, data: &ScosData) -> ModelShape {
        ModelShape {
            task: data.task,
            pe_kind: self.pe_kind,
            num_bands: data.num_bands,
            sites: data.sites(),
            k: self.k,
            num_classes: data.num_classes,
            hidden: self.hidden,
        }
    }
}

/// One training-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub loss: f64,
    pub bands: BandCombination,
}

/// Training log as CSV with header `step,loss,bands`.
pub fn log_csv(log: &[LogEntry]) -> String {
    let mut out = String::from("step,loss,bands\n");
    for e in log {
        out.push_str(&format!("{},{},{}\n", e.step, e.loss, e.bands));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: SupernetParams,
    pub log: Vec<LogEntry>,
}

/// Checks that `data` can be fed to `params`.
pub fn check_compatible(params: &SupernetParams, data: &ScosData) -> Result<()> {
    if params.task != data.task {
        return Err(Error::shape(format!("parameters are for {}, data for {}", params.task, data.task)));
    }
    if params.num_bands != data.num_bands || params.sites != data.sites() {
        return Err(Error::shape(format!(
            "parameters expect N={} HW={}, data has N={} HW={}",
            params.num_bands,
            params.sites,
            data.num_bands,
            data.sites()
        )));
    }
    if data.task == TaskKind::Classification && params.num_classes() != usize::from(data.num_classes) {
        return Err(Error::shape(format!(
            "parameters have {} classes, data {}",
            params.num_classes(),
            data.num_classes
        )));
    }
    Ok(())
}

/// Step size and gradient clipping of plain gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub learning_rate: f64,
    /// Maximum global gradient norm; 0 disables clipping.
    pub grad_clip: f64,
}

/// One gradient-descent step on the task loss; returns the loss before the
/// update.
pub fn gd_step(params: &mut SupernetParams, batch: &[&Sample], bc: &BandCombination, rule: StepRule) -> Result<f64> {
    let (loss, mut grad) = loss_and_grad(params, batch, bc, Loss::Task)?;
    let mut grads = grad.tensors_mut();
    let norm = grads.iter().flat_map(|g| g.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if !loss.is_finite() || !norm.is_finite() {
        return Err(Error::Diverged {
            step: params.steps as usize,
            loss,
        });
    }
    let scale = if rule.grad_clip > 0.0 && norm > rule.grad_clip {
        rule.grad_clip / norm
    } else {
        1.0
    };
    let lr = rule.learning_rate * scale;
    for (p, g) in params.tensors_mut().into_iter().zip(grads.iter_mut()) {
        p.iter_mut().zip(g.iter()).for_each(|(p, g)| *p -= lr * g);
    }
    params.steps += 1;
    Ok(loss)
}

fn uniform_bc(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<BandCombination> {
    let total = count_combinations(n as u64, k as u64)?;
    unrank_combination(n, k, rng.random_range(0..total))
}

/// Runs `iterations` steps. Each step draws a minibatch and, unless `fixed`
/// is given, a uniformly random combination.
fn run_steps(
    params: &mut SupernetParams,
    data: &ScosData,
    iterations: usize,
    batch_size: usize,
    rule: StepRule,
    fixed: Option<&BandCombination>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LogEntry>> {
    if data.train.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let batch_size = batch_size.min(data.train.len());
    let mut log = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let bc = match fixed {
            Some(bc) => bc.clone(),
            None => uniform_bc(rng, params.num_bands, params.k)?,
        };
        let batch: Vec<&Sample> = index::sample(rng, data.train.len(), batch_size)
            .into_iter()
            .map(|i| &data.train[i])
            .collect();
        let step = params.steps;
        let loss = gd_step(params, &batch, &bc, rule)?;
        log.push(LogEntry { step, loss, bands: bc });
    }
    Ok(log)
}

/// Trains a supernet on random combinations of `cfg.k` bands. Single
/// threaded and fully determined by the data and `cfg`.
pub fn train_one_shot(data: &ScosData, cfg: &ScosTrainConfig) -> Result<Trained> {
    cfg.validate(data.num_bands)?;
    if cfg.patch_size != data.patch_size {
        return Err(Error::invalid(format!(
            "config patch size {} differs from the data's {}",
            cfg.patch_size, data.patch_size
        )));
    }
    let mut params = SupernetParams::init(&cfg.shape(data), cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let rule = StepRule {
        learning_rate: cfg.learning_rate,
        grad_clip: cfg.grad_clip,
    };
    let log = run_steps(&mut params, data, cfg.iterations, cfg.batch_size, rule, None, &mut rng)?;
    Ok(Trained { params, log })
}

/// Fine-tuning of one chosen combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    /// Start from the supernet's weights instead of a fresh initialization.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch_size: 32,
            learning_rate: 0.05,
            grad_clip: 5.0,
            warm_start: false,
            seed: 0,
        }
    }
}

/// Trains on `bc` alone and returns the model with its validation score on
/// the primary metric.
pub fn finetune(
    supernet: &SupernetParams,
    data: &ScosData,
    bc: &BandCombination,
    cfg: &FinetuneConfig,
) -> Result<(SupernetParams, f64)> {
    check_compatible(supernet, data)?;
    let mut params = if cfg.warm_start {
        supernet.clone()
    } else {
        let shape = ModelShape {
            task: supernet.task,
            pe_kind: supernet.pe_kind,
            num_bands: supernet.num_bands,
            sites: supernet.sites,
            k: supernet.k,
            num_classes: supernet.num_classes() as u16,
            hidden: match &supernet.head {
                Head::Classifier { hidden, .. } => hidden.rows,
                Head::Decoder { .. } => 1,
            },
        };
        SupernetParams::init(&shape, cfg.seed)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let rule = StepRule {
        learning_rate: cfg.learning_rate,
        grad_clip: cfg.grad_clip,
    };
    run_steps(&mut params, data, cfg.iterations, cfg.batch_size.max(1), rule, Some(bc), &mut rng)?;
    let score = evaluate_bc(&params, data, bc)?;
    Ok((params, score))
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn metrics_from_outputs(params: &SupernetParams, val: &[Sample], outputs: Vec<Vec<f64>>) -> Result<MetricMap> {
    match params.task {
        TaskKind::Classification => {
            let predicted: Vec<u16> = outputs.iter().map(|o| argmax(o) as u16 + 1).collect();
            let truth: Vec<u16> = val.iter().map(|s| s.label).collect();
            Ok(classification_scores(&predicted, &truth, params.num_classes() as u16)?.to_metric_map())
        }
        TaskKind::Reconstruction => {
            let reference: Vec<f64> = val.iter().flat_map(|s| s.input.iter().copied()).collect();
            reconstruction_metrics(&outputs.concat(), &reference)
        }
    }
}

/// All task metrics of `bc` on the validation set, by inference only.
pub fn evaluate_metrics(params: &SupernetParams, data: &ScosData, bc: &BandCombination) -> Result<MetricMap> {
    check_compatible(params, data)?;
    if data.val.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    let outputs = data
        .val
        .iter()
        .map(|s| forward(params, &s.input, bc))
        .collect::<Result<Vec<_>>>()?;
    metrics_from_outputs(params, &data.val, outputs)
}

/// The primary metric of `bc` on the validation set.
pub fn evaluate_bc(params: &SupernetParams, data: &ScosData, bc: &BandCombination) -> Result<f64> {
    let spec = TaskSpec::new(params.task);
    Ok(evaluate_metrics(params, data, bc)?[spec.primary_metric])
}

/// Supernet-backed evaluator. Band rows are encoded independently, so the
/// per-band part of the forward pass is computed once up front and each
/// combination only pays for pooling and the head.
pub struct SupernetEvaluator<'a> {
    params: &'a SupernetParams,
    val: &'a [Sample],
    task: TaskSpec,
    dataset_id: String,
    backbone_id: String,
    /// Per validation sample, per band: classifier token features or the
    /// encoded row.
    cache: Vec<Vec<Vec<f64>>>,
}

impl<'a> SupernetEvaluator<'a> {
    pub fn new(params: &'a SupernetParams, data: &'a ScosData, dataset_id: impl Into<String>) -> Result<Self> {
        check_compatible(params, data)?;
        if data.val.is_empty() {
            return Err(Error::invalid("empty validation set"));
        }
        let hw = params.sites;
        let cache = crate::parallel::install(|| {
            data.val
                .par_iter()
                .map(|s| {
                    let encoded = super::model::encode(params, &s.input)?;
                    Ok(encoded
                        .chunks_exact(hw)
                        .map(|row| match params.task {
                            TaskKind::Classification => params.token_features(row),
                            TaskKind::Reconstruction => row.to_vec(),
                        })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Self {
            params,
            val: &data.val,
            task: TaskSpec::new(params.task),
            dataset_id: dataset_id.into(),
            backbone_id: format!("scos-{}", params.pe_kind),
            cache,
        })
    }
}

impl Evaluator for SupernetEvaluator<'_> {
    fn task(&self) -> &TaskSpec {
        &self.task
    }

    fn num_bands(&self) -> usize {
        self.params.num_bands
    }

    fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    fn backbone_id(&self) -> &str {
        &self.backbone_id
    }

    /// Deterministic; the seed is ignored.
    fn evaluate(&self, bc: &BandCombination, _seed: u64) -> Result<MetricMap> {
        bc.check_bands(self.params.num_bands)?;
        if self.params.task == TaskKind::Reconstruction && bc.len() != self.params.k {
            return Err(Error::invalid(format!("decoder expects {} bands, got {}", self.params.k, bc.len())));
        }
        let outputs = self
            .cache
            .iter()
            .map(|rows| match self.params.task {
                TaskKind::Classification => {
                    let g = pool(bc.indices().iter().map(|&b| rows[b].clone()));
                    self.params.logits_from_pooled(&g)
                }
                TaskKind::Reconstruction => {
                    let selected: Vec<&[f64]> = bc.indices().iter().map(|&b| rows[b].as_slice()).collect();
                    self.params.decode(&selected)
                }
            })
            .collect();
        metrics_from_outputs(self.params, self.val, outputs)
    }
}

/// Random search over `space` scored by the supernet; no training happens.
pub fn scos_search(
    params: &SupernetParams,
    data: &ScosData,
    space: &SearchSpace,
    m: u64,
    seed: u64,
) -> Result<SearchResult> {
    let evaluator = SupernetEvaluator::new(params, data, "scos")?;
    let mut result = random_search(Objective::primary(&evaluator, 0), space, m, seed)?;
    result.algorithm = "scos".into();
    Ok(result)
}

/// Maximum relative error between analytic gradients and central finite
/// differences (step 1e-4) over every trainable parameter. Discrepancies up
/// to an absolute 1e-9 count as zero, which keeps near-zero partials from
/// turning roundoff into large relative errors; otherwise the error is
/// `|analytic - numeric| / max(|analytic|, |numeric|)`.
pub fn grad_check(params: &SupernetParams, batch: &[&Sample], bc: &BandCombination, loss: Loss) -> Result<f64> {
    const STEP: f64 = 1e-4;
    const FLOOR: f64 = 1e-9;
    let (_, mut analytic) = loss_and_grad(params, batch, bc, loss)?;
    let analytic: Vec<f64> = analytic.tensors_mut().into_iter().flat_map(|t| t.clone()).collect();
    let mut probe = params.clone();
    let sizes: Vec<usize> = probe.tensors_mut().iter().map(|t| t.len()).collect();
    let mut worst = 0.0f64;
    let mut flat = 0;
    for (ti, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let original = probe.tensors_mut()[ti][i];
            probe.tensors_mut()[ti][i] = original + STEP;
            let up = loss_value(&probe, batch, bc, loss)?;
            probe.tensors_mut()[ti][i] = original - STEP;
            let down = loss_value(&probe, batch, bc, loss)?;
            probe.tensors_mut()[ti][i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[flat];
            let diff = (a - numeric).abs();
            let err = if diff <= FLOOR { 0.0 } else { diff / a.abs().max(numeric.abs()) };
            worst = worst.max(err);
            flat += 1;
        }
    }
    Ok(worst)
}

pub fn save_params(params: &SupernetParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(params).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<SupernetParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let params: SupernetParams = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scos::model::tests::{samples, shape};

    fn data(task: TaskKind, seed: u64) -> ScosData {
        let all = samples(24, 5, 4, seed);
        let mut train = all;
        let val = train.split_off(16);
        let strip = |v: Vec<Sample>| match task {
            TaskKind::Classification => v,
            TaskKind::Reconstruction => v.into_iter().map(|s| Sample { label: 0, ..s }).collect(),
        };
        ScosData {
            task,
            num_bands: 5,
            patch_size: 2,
            num_classes: if task == TaskKind::Classification { 3 } else { 0 },
            train: strip(train),
            val: strip(val),
        }
    }

    fn cfg(iterations: usize) -> ScosTrainConfig {
        ScosTrainConfig {
            iterations,
            batch_size: 4,
            patch_size: 2,
            hidden: 6,
            ..Default::default()
        }
    }

    fn bc(v: &[usize]) -> BandCombination {
        BandCombination::new(v.to_vec()).unwrap()
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for task in [TaskKind::Classification, TaskKind::Reconstruction] {
            for (i, pe) in PeKind::ALL.into_iter().enumerate() {
                let p = SupernetParams::init(&shape(task, pe), 100 + i as u64).unwrap();
                let d = data(task, i as u64);
                let batch: Vec<&Sample> = d.train.iter().take(3).collect();
                let err = grad_check(&p, &batch, &bc(&[0, 2, 3]), Loss::Task).unwrap();
                assert!(err < 1e-4, "{task} {pe}: {err}");
            }
        }
    }

    #[test]
    fn quadratic_loss_gradient_is_exact() {
        let p = SupernetParams::init(&shape(TaskKind::Reconstruction, PeKind::Nope), 8).unwrap();
        let d = data(TaskKind::Reconstruction, 3);
        let batch: Vec<&Sample> = d.train.iter().take(2).collect();
        assert!(grad_check(&p, &batch, &bc(&[1, 2, 4]), Loss::Squared).unwrap() < 1e-6);
    }

    #[test]
    fn zero_gradient_point_is_guarded() {
        let mut p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Nope), 8).unwrap();
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        let s = Sample { input: vec![0.5; 20], label: 1 };
        let others = [Sample { label: 2, ..s.clone() }, Sample { label: 3, ..s.clone() }];
        let batch = vec![&s, &others[0], &others[1]];
        let err = grad_check(&p, &batch, &bc(&[0, 1, 2]), Loss::Task).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_iterations_return_initial_parameters() {
        let d = data(TaskKind::Classification, 0);
        let t = train_one_shot(&d, &cfg(0)).unwrap();
        assert_eq!(t.params, SupernetParams::init(&cfg(0).shape(&d), 0).unwrap());
        assert!(t.log.is_empty());
    }

    #[test]
    fn repeated_steps_on_one_pair_reduce_loss() {
        let d = data(TaskKind::Classification, 1);
        let mut p = SupernetParams::init(&cfg(0).shape(&d), 1).unwrap();
        let batch: Vec<&Sample> = d.train.iter().take(6).collect();
        let b = bc(&[0, 1, 4]);
        let rule = StepRule { learning_rate: 0.05, grad_clip: 0.0 };
        let first = gd_step(&mut p, &batch, &b, rule).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = gd_step(&mut p, &batch, &b, rule).unwrap();
        }
        assert!(last < first, "{first} -> {last}");
        assert_eq!(p.steps, 100);
    }

    #[test]
    fn training_is_deterministic() {
        let d = data(TaskKind::Classification, 2);
        let a = train_one_shot(&d, &cfg(50)).unwrap();
        let b = train_one_shot(&d, &cfg(50)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log.len(), 50);
        assert!(log_csv(&a.log).starts_with("step,loss,bands\n0,"));
    }

    #[test]
    fn divergence_reports_the_step() {
        let d = data(TaskKind::Reconstruction, 2);
        let c = ScosTrainConfig { learning_rate: 1e200, grad_clip: 0.0, ..cfg(20) };
        assert!(matches!(train_one_shot(&d, &c), Err(Error::Diverged { .. })));
    }

    #[test]
    fn evaluation_paths_agree() {
        for task in [TaskKind::Classification, TaskKind::Reconstruction] {
            let d = data(task, 4);
            let t = train_one_shot(&d, &cfg(30)).unwrap();
            let ev = SupernetEvaluator::new(&t.params, &d, "toy").unwrap();
            for b in [bc(&[0, 1, 2]), bc(&[1, 3, 4])] {
                let direct = evaluate_metrics(&t.params, &d, &b).unwrap();
                let cached = ev.evaluate(&b, 9).unwrap();
                for (k, v) in &direct {
                    assert!((v - cached[k]).abs() < 1e-12, "{k}");
                }
                assert_eq!(evaluate_bc(&t.params, &d, &b).unwrap(), evaluate_bc(&t.params, &d, &b).unwrap());
            }
        }
    }

    #[test]
    fn empty_validation_set_is_an_error() {
        let mut d = data(TaskKind::Classification, 0);
        let t = train_one_shot(&d, &cfg(1)).unwrap();
        d.val.clear();
        assert!(evaluate_bc(&t.params, &d, &bc(&[0, 1, 2])).is_err());
    }

    #[test]
    fn search_edges() {
        let d = data(TaskKind::Classification, 5);
        let t = train_one_shot(&d, &cfg(40)).unwrap();
        let space = SearchSpace::new(5, 3).unwrap();
        let full = scos_search(&t.params, &d, &space, 100, 1).unwrap();
        let mut best: Option<(f64, BandCombination)> = None;
        for b in space.all().unwrap() {
            let v = evaluate_bc(&t.params, &d, &b).unwrap();
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, b));
            }
        }
        assert_eq!(full.best, best.unwrap().1);
        assert_eq!(full.evaluations, 10);
        let one = scos_search(&t.params, &d, &space, 1, 1).unwrap();
        assert_eq!(one.trace.len(), 1);
    }

    #[test]
    fn params_round_trip_exactly() {
        let d = data(TaskKind::Classification, 6);
        let t = train_one_shot(&d, &cfg(10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        save_params(&t.params, &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), t.params);
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let d = data(TaskKind::Classification, 6);
        let t = train_one_shot(&d, &cfg(1)).unwrap();
        let r = data(TaskKind::Reconstruction, 6);
        assert!(matches!(check_compatible(&t.params, &r), Err(Error::Shape(_))));
    }

    #[test]
    fn identity_decoder_reconstructs_rank_one_data() {
        let base = [0.2, 0.4, 0.6, 0.8];
        let samples: Vec<Sample> = (0..8)
            .map(|i| {
                let a = 0.5 + 0.05 * i as f64;
                Sample { input: (0..4).flat_map(|b| vec![a * base[b]; 4]).collect(), label: 0 }
            })
            .collect();
        let shape = ModelShape {
            task: TaskKind::Reconstruction,
            pe_kind: PeKind::Nope,
            num_bands: 4,
            sites: 4,
            k: 4,
            num_classes: 0,
            hidden: 1,
        };
        let mut p = SupernetParams::init(&shape, 0).unwrap();
        let identity: Vec<f64> = (0..16).map(|i| f64::from(i % 5 == 0)).collect();
        p.mlp1.weight = identity.clone();
        if let Head::Decoder { weight } = &mut p.head {
            weight.weight = identity;
        }
        let all = bc(&[0, 1, 2, 3]);
        let batch: Vec<&Sample> = samples.iter().collect();
        let rule = StepRule { learning_rate: 0.001, grad_clip: 0.0 };
        for _ in 0..300 {
            gd_step(&mut p, &batch, &all, rule).unwrap();
        }
        for s in &samples {
            let out = forward(&p, &s.input, &all).unwrap();
            let err = crate::hsi::metrics::mrae(&out, &s.input).unwrap();
            assert!(err < 0.01, "{err}");
        }
    }

    #[test]
    fn finetune_modes() {
        let d = data(TaskKind::Classification, 7);
        let t = train_one_shot(&d, &cfg(20)).unwrap();
        let b = bc(&[0, 1, 2]);
        let fc = FinetuneConfig { iterations: 10, batch_size: 4, ..Default::default() };
        let (fresh, s1) = finetune(&t.params, &d, &b, &fc).unwrap();
        let (warm, s2) = finetune(&t.params, &d, &b, &FinetuneConfig { warm_start: true, ..fc.clone() }).unwrap();
        assert_eq!(fresh.steps, 10);
        assert_eq!(warm.steps, 30);
        assert!((0.0..=1.0).contains(&s1) && (0.0..=1.0).contains(&s2));
    }
}
