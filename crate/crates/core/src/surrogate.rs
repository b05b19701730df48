//! Performance predictors over band combinations.
//!
//! A band combination is featurized as its one-hot band membership, its
//! band indices scaled to `[0, 1]`, and (optionally) its mean entropy and
//! mean pairwise spectral angle. Two model kinds are provided: closed-form
//! ridge regression and a one-hidden-layer ReLU network trained by
//! full-batch gradient descent.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsi::{BandCombination, HsiCube};
use crate::linalg;
use crate::stats::{self, BandStats};

/// Bumped whenever the feature layout changes; saved models carry it.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Feature dimension for `n` bands and combinations of size `k`.
pub fn feature_len(n: usize, k: usize) -> usize {
    n + k + 2
}

/// `[one-hot(n) | index / (n-1) for each band | entropy | sam]`.
pub fn featurize(bc: &BandCombination, n: usize, cube: Option<&HsiCube>) -> Result<Vec<f64>> {
    let (entropy, sam) = match cube {
        Some(cube) => {
            let sam = if bc.len() >= 2 { stats::bc_sam(cube, bc)? } else { 0.0 };
            (stats::bc_entropy(cube, bc)?, sam)
        }
        None => (0.0, 0.0),
    };
    featurize_parts(bc, n, entropy, sam)
}

/// Same layout as [`featurize`], reading statistics from precomputed tables.
pub fn featurize_with_stats(bc: &BandCombination, n: usize, stats: Option<&BandStats>) -> Result<Vec<f64>> {
    let (entropy, sam) = stats.map_or((0.0, 0.0), |s| (s.bc_entropy(bc), s.bc_sam(bc)));
    featurize_parts(bc, n, entropy, sam)
}

fn featurize_parts(bc: &BandCombination, n: usize, entropy: f64, sam: f64) -> Result<Vec<f64>> {
    bc.check_bands(n)?;
    let mut f = vec![0.0; feature_len(n, bc.len())];
    let denom = n.saturating_sub(1).max(1) as f64;
    for (j, &b) in bc.indices().iter().enumerate() {
        f[b] = 1.0;
        f[n + j] = b as f64 / denom;
    }
    f[n + bc.len()] = entropy;
    f[n + bc.len() + 1] = sam;
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Ridge,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    /// Ridge penalty. Also applied as L2 weight decay for the MLP.
    pub lambda: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::Ridge,
            lambda: 1e-3,
            hidden: 32,
            epochs: 2000,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

/// Weights of the one-hidden-layer network, on standardized inputs/outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    /// `hidden x dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weights {
    Ridge { coef: Vec<f64>, intercept: f64 },
    Mlp(MlpWeights),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateModel {
    pub layout_version: u32,
    pub lambda: f64,
    /// Band count and combination size the features were built for; `None`
    /// for models fitted directly on feature matrices.
    pub num_bands: Option<usize>,
    pub k: Option<usize>,
    pub dim: usize,
    pub weights: Weights,
    pub train_rmse: f64,
}

impl SurrogateModel {
    pub fn kind(&self) -> SurrogateKind {
        match self.weights {
            Weights::Ridge { .. } => SurrogateKind::Ridge,
            Weights::Mlp(_) => SurrogateKind::Mlp,
        }
    }

    /// Prediction for a raw feature vector.
    pub fn predict_features(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dim {
            return Err(Error::shape(format!(
                "model expects {} features, got {}",
                self.dim,
                features.len()
            )));
        }
        Ok(match &self.weights {
            Weights::Ridge { coef, intercept } => intercept + dot(coef, features),
            Weights::Mlp(m) => m.predict(features),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if model.layout_version != FEATURE_LAYOUT_VERSION {
            return Err(Error::invalid(format!(
                "model uses feature layout {}, this build uses {FEATURE_LAYOUT_VERSION}",
                model.layout_version
            )));
        }
        Ok(model)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl MlpWeights {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        self.y_mean + self.y_scale * mlp_forward(&self.w1, &self.b1, &self.w2, self.b2, &z)
    }
}

fn mlp_forward(w1: &[f64], b1: &[f64], w2: &[f64], b2: f64, x: &[f64]) -> f64 {
    let d = x.len();
    let mut out = b2;
    for h in 0..b1.len() {
        let a = b1[h] + dot(&w1[h * d..(h + 1) * d], x);
        if a > 0.0 {
            out += w2[h] * a;
        }
    }
    out
}

/// Flat parameter vector `[w1 | b1 | w2 | b2]` for the MLP.
#[derive(Debug, Clone)]
pub(crate) struct MlpParams {
    pub dim: usize,
    pub hidden: usize,
    pub flat: Vec<f64>,
}

impl MlpParams {
    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (d, h) = (self.dim, self.hidden);
        let (w1, rest) = self.flat.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }

    /// Weighted mean squared error plus `decay/2 * |w|^2` and its gradient.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64], ws: &[f64], decay: f64) -> (f64, Vec<f64>) {
        let (d, h) = (self.dim, self.hidden);
        let (w1, b1, w2, b2) = self.split();
        let total: f64 = ws.iter().sum();
        let mut grad = vec![0.0; self.flat.len()];
        let mut loss = 0.0;
        let mut act = vec![0.0; h];
        for ((x, &y), &w) in xs.iter().zip(ys).zip(ws) {
            let mut out = b2;
            for j in 0..h {
                act[j] = (b1[j] + dot(&w1[j * d..(j + 1) * d], x)).max(0.0);
                out += w2[j] * act[j];
            }
            let err = out - y;
            loss += w * err * err / total;
            let g_out = 2.0 * w * err / total;
            for j in 0..h {
                grad[h * d + h + j] += g_out * act[j];
                if act[j] > 0.0 {
                    let g_pre = g_out * w2[j];
                    grad[h * d + j] += g_pre;
                    for (gi, xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gi += g_pre * xi;
                    }
                }
            }
            grad[h * d + 2 * h] += g_out;
        }
        if decay > 0.0 {
            for i in (0..h * d).chain(h * d + h..h * d + 2 * h) {
                loss += 0.5 * decay * self.flat[i] * self.flat[i];
                grad[i] += decay * self.flat[i];
            }
        }
        (loss, grad)
    }
}

fn standardizer(columns: impl Iterator<Item = Vec<f64>>, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = weights.iter().sum();
    columns
        .map(|col| {
            let mean = dot(&col, weights) / total;
            let var = col.iter().zip(weights).map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / total;
            let sd = var.sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        })
        .unzip()
}

fn fit_mlp(xs: &[Vec<f64>], ys: &[f64], ws: &[f64], cfg: &SurrogateConfig) -> Result<MlpWeights> {
    let dim = xs[0].len();
    let hidden = cfg.hidden.max(1);
    let (x_mean, x_scale) = standardizer((0..dim).map(|c| xs.iter().map(|x| x[c]).collect()), ws);
    let (y_mean, y_scale) = {
        let (m, s) = standardizer(std::iter::once(ys.to_vec()), ws);
        (m[0], s[0])
    };
    let zx: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| x.iter().zip(&x_mean).zip(&x_scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let zy: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let he = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("finite std");
    let out_init = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("finite std");
    let mut flat = Vec::with_capacity(hidden * dim + 2 * hidden + 1);
    flat.extend((0..hidden * dim).map(|_| he.sample(&mut rng)));
    flat.extend(std::iter::repeat_n(0.01, hidden));
    flat.extend((0..hidden).map(|_| out_init.sample(&mut rng)));
    flat.push(0.0);
    let mut params = MlpParams { dim, hidden, flat };

    for epoch in 0..cfg.epochs {
        let (loss, grad) = params.loss_and_grad(&zx, &zy, ws, cfg.lambda);
        if !loss.is_finite() {
            return Err(Error::Diverged { step: epoch, loss });
        }
        for (p, g) in params.flat.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
    }
    let (w1, b1, w2, b2) = params.split();
    Ok(MlpWeights {
        w1: w1.to_vec(),
        b1: b1.to_vec(),
        w2: w2.to_vec(),
        b2,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    })
}

/// Fits a model on raw feature rows with optional per-sample weights.
pub fn fit_features(xs: &[Vec<f64>], ys: &[f64], weights: Option<&[f64]>, cfg: &SurrogateConfig) -> Result<SurrogateModel> {
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two samples to fit a surrogate"));
    }
    if xs.len() != ys.len() {
        return Err(Error::shape(format!("{} feature rows vs {} targets", xs.len(), ys.len())));
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim) {
        return Err(Error::shape("feature rows differ in length"));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("surrogate targets must be finite"));
    }
    let unit = vec![1.0; xs.len()];
    let ws = weights.unwrap_or(&unit);
    if ws.len() != xs.len() || ws.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative, one per sample"));
    }
    let weights = match cfg.kind {
        SurrogateKind::Ridge => {
            let x = DMatrix::from_fn(xs.len(), dim, |r, c| xs[r][c]);
            let y = DMatrix::from_column_slice(ys.len(), 1, ys);
            let (coef, intercept) = linalg::ridge(&x, &y, Some(ws), cfg.lambda)?;
            Weights::Ridge {
                coef: coef.column(0).iter().copied().collect(),
                intercept: intercept[0],
            }
        }
        SurrogateKind::Mlp => Weights::Mlp(fit_mlp(xs, ys, ws, cfg)?),
    };
    let mut model = SurrogateModel {
        layout_version: FEATURE_LAYOUT_VERSION,
        lambda: cfg.lambda,
        num_bands: None,
        k: None,
        dim,
        weights,
        train_rmse: 0.0,
    };
    let total: f64 = ws.iter().sum();
    let sse = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| {
            let e = model.predict_features(x).expect("dimension checked") - y;
            w * e * e
        })
        .sum::<f64>();
    model.train_rmse = (sse / total).sqrt();
    Ok(model)
}

/// Fits a model on `(combination, value)` samples over `n` bands, with
/// optional per-sample weights.
pub fn fit_weighted(
    samples: &[(BandCombination, f64)],
    weights: Option<&[f64]>,
    n: usize,
    stats: Option<&BandStats>,
    cfg: &SurrogateConfig,
) -> Result<SurrogateModel> {
    let k = samples.first().map_or(0, |(bc, _)| bc.len());
    if samples.iter().any(|(bc, _)| bc.len() != k) {
        return Err(Error::invalid("all training combinations must have the same size"));
    }
    let xs = samples
        .iter()
        .map(|(bc, _)| featurize_with_stats(bc, n, stats))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let mut model = fit_features(&xs, &ys, weights, cfg)?;
    model.num_bands = Some(n);
    model.k = Some(k);
    Ok(model)
}

pub fn fit(samples: &[(BandCombination, f64)], n: usize, stats: Option<&BandStats>, cfg: &SurrogateConfig) -> Result<SurrogateModel> {
    fit_weighted(samples, None, n, stats, cfg)
}

/// Predicted value for `bc`. The band count and combination size must match
/// what the model was fitted on.
pub fn predict(model: &SurrogateModel, bc: &BandCombination, n: usize, stats: Option<&BandStats>) -> Result<f64> {
    if model.num_bands.is_some_and(|m| m != n) || model.k.is_some_and(|k| k != bc.len()) {
        return Err(Error::shape(format!(
            "model fitted for {:?} bands / size {:?}, asked for {n} bands / size {}",
            model.num_bands,
            model.k,
            bc.len()
        )));
    }
    model.predict_features(&featurize_with_stats(bc, n, stats)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn feature_layout() {
        let bc = BandCombination::new(vec![0, 1, 2]).unwrap();
        let f = featurize(&bc, 4, None).unwrap();
        assert_eq!(f.len(), feature_len(4, 3));
        assert_eq!(&f[..4], &[1.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(f[4], 0.0);
        assert_abs_diff_eq!(f[5], 1.0 / 3.0);
        assert_abs_diff_eq!(f[6], 2.0 / 3.0);
        assert_eq!(&f[7..], &[0.0, 0.0]);
        assert!(featurize(&BandCombination::new(vec![4]).unwrap(), 4, None).is_err());
    }

    #[test]
    fn one_hot_sums_to_k() {
        let bc = BandCombination::new(vec![1, 5, 9, 10]).unwrap();
        let f = featurize(&bc, 12, None).unwrap();
        assert_eq!(f[..12].iter().sum::<f64>(), 4.0);
    }

    fn random_linear_problem(seed: u64, rows: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..rows).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys = xs.iter().map(|x| 0.25 + dot(&truth, x)).collect();
        (xs, ys, truth)
    }

    #[test]
    fn ridge_interpolates_exact_linear_data() {
        let (xs, ys, truth) = random_linear_problem(1, 30, 5);
        let cfg = SurrogateConfig { lambda: 0.0, ..Default::default() };
        let model = fit_features(&xs, &ys, None, &cfg).unwrap();
        assert!(model.train_rmse < 1e-8, "{}", model.train_rmse);
        match &model.weights {
            Weights::Ridge { coef, intercept } => {
                for (c, t) in coef.iter().zip(&truth) {
                    assert_abs_diff_eq!(c, t, epsilon = 1e-8);
                }
                assert_abs_diff_eq!(*intercept, 0.25, epsilon = 1e-8);
            }
            _ => unreachable!(),
        }
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(model.predict_features(x).unwrap(), y, epsilon = 1e-6);
        }
    }

    #[test]
    fn ridge_matches_normal_equation_oracle() {
        // Oracle: augment with a bias column and solve the full normal equations.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (xs, _, _) = random_linear_problem(2, 25, 4);
        let ys: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let model = fit_features(&xs, &ys, None, &SurrogateConfig { lambda: 0.0, ..Default::default() }).unwrap();
        let a = DMatrix::from_fn(25, 5, |r, c| if c < 4 { xs[r][c] } else { 1.0 });
        let y = nalgebra::DVector::from_column_slice(&ys);
        let w = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).unwrap();
        let Weights::Ridge { coef, intercept } = &model.weights else { unreachable!() };
        for c in 0..4 {
            assert_abs_diff_eq!(coef[c], w[c], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(*intercept, w[4], epsilon = 1e-8);
    }

    #[test]
    fn singular_without_penalty_is_reported() {
        // one-hot columns always sum to k, collinear with the intercept
        let samples: Vec<(BandCombination, f64)> = [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [0, 3]]
            .iter()
            .enumerate()
            .map(|(i, b)| (BandCombination::new(b.to_vec()).unwrap(), i as f64))
            .collect();
        let err = fit(&samples, 4, None, &SurrogateConfig { lambda: 0.0, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::Singular));
        assert!(err.to_string().contains("lambda > 0"));
        assert!(fit(&samples, 4, None, &SurrogateConfig::default()).is_ok());
    }

    #[test]
    fn duplicates_equal_weighted_fit() {
        let bcs: Vec<BandCombination> = [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]]
            .iter()
            .map(|b| BandCombination::new(b.to_vec()).unwrap())
            .collect();
        let values = [0.3, 0.5, 0.9, 0.1, 0.7];
        let counts = [1usize, 3, 1, 2, 1];
        let mut dup = Vec::new();
        for ((bc, &v), &c) in bcs.iter().zip(&values).zip(&counts) {
            for _ in 0..c {
                dup.push((bc.clone(), v));
            }
        }
        let uniq: Vec<_> = bcs.iter().cloned().zip(values).collect();
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let cfg = SurrogateConfig { lambda: 0.1, ..Default::default() };
        let a = fit(&dup, 4, None, &cfg).unwrap();
        let b = fit_weighted(&uniq, Some(&w), 4, None, &cfg).unwrap();
        for bc in &bcs {
            assert_abs_diff_eq!(predict(&a, bc, 4, None).unwrap(), predict(&b, bc, 4, None).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn huge_penalty_collapses_to_mean() {
        let (xs, ys, _) = random_linear_problem(3, 20, 4);
        let model = fit_features(&xs, &ys, None, &SurrogateConfig { lambda: 1e12, ..Default::default() }).unwrap();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let Weights::Ridge { coef, .. } = &model.weights else { unreachable!() };
        assert!(coef.iter().all(|c| c.abs() < 1e-9));
        for x in &xs {
            assert_abs_diff_eq!(model.predict_features(x).unwrap(), mean, epsilon = 1e-8);
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let (dim, hidden) = (4, 6);
            let n = dim * hidden + 2 * hidden + 1;
            let params = MlpParams {
                dim,
                hidden,
                flat: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ws: Vec<f64> = (0..7).map(|_| rng.random_range(0.5..2.0)).collect();
            let decay = 0.01 * trial as f64;
            let (_, grad) = params.loss_and_grad(&xs, &ys, &ws, decay);
            let h = 1e-4;
            for i in 0..n {
                let mut p = params.clone();
                p.flat[i] += h;
                let up = p.loss_and_grad(&xs, &ys, &ws, decay).0;
                p.flat[i] -= 2.0 * h;
                let down = p.loss_and_grad(&xs, &ys, &ws, decay).0;
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn mlp_fits_and_is_deterministic() {
        let (xs, ys, _) = random_linear_problem(4, 40, 3);
        let cfg = SurrogateConfig { kind: SurrogateKind::Mlp, lambda: 0.0, epochs: 3000, ..Default::default() };
        let a = fit_features(&xs, &ys, None, &cfg).unwrap();
        let b = fit_features(&xs, &ys, None, &cfg).unwrap();
        assert_eq!(a, b);
        let spread = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
        assert!(a.train_rmse < 0.1 * spread.sqrt(), "rmse {}", a.train_rmse);
    }

    #[test]
    fn predict_checks_shapes() {
        let samples: Vec<_> = [[0, 1], [0, 2], [1, 2]]
            .iter()
            .enumerate()
            .map(|(i, b)| (BandCombination::new(b.to_vec()).unwrap(), i as f64))
            .collect();
        let model = fit(&samples, 4, None, &SurrogateConfig::default()).unwrap();
        let bc = BandCombination::new(vec![1, 3]).unwrap();
        assert_eq!(predict(&model, &bc, 4, None).unwrap(), predict(&model, &bc, 4, None).unwrap());
        assert!(predict(&model, &bc, 5, None).is_err());
        assert!(predict(&model, &BandCombination::new(vec![1]).unwrap(), 4, None).is_err());
        assert!(model.predict_features(&[0.0; 3]).is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let (xs, ys, _) = random_linear_problem(6, 12, 3);
        for kind in [SurrogateKind::Ridge, SurrogateKind::Mlp] {
            let cfg = SurrogateConfig { kind, epochs: 50, ..Default::default() };
            let model = fit_features(&xs, &ys, None, &cfg).unwrap();
            let path = dir.path().join("m.json");
            model.save(&path).unwrap();
            assert_eq!(SurrogateModel::load(&path).unwrap(), model);
        }
    }
}
