//! Supernet parameters, the encoder, task heads and manual backpropagation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::patch::{ape_embedding, Sample};
use crate::error::{Error, Result};
use crate::hsi::metrics::{mrae, MRAE_EPSILON};
use crate::hsi::{BandCombination, TaskKind};

/// Position-embedding variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeKind {
    /// Fixed sinusoidal embedding added after the spatial layer.
    Ape,
    /// Learned `N x HW` embedding added after the spatial layer.
    Clpe,
    /// Learned spatial embedding between two spatial layers, then a learned
    /// per-band offset.
    Slpe,
    /// No embedding; the baseline that feeds raw bands to the head.
    Nope,
}

impl PeKind {
    pub const ALL: [PeKind; 4] = [PeKind::Ape, PeKind::Clpe, PeKind::Slpe, PeKind::Nope];

    pub fn name(self) -> &'static str {
        match self {
            PeKind::Ape => "ape",
            PeKind::Clpe => "clpe",
            PeKind::Slpe => "slpe",
            PeKind::Nope => "nope",
        }
    }
}

impl fmt::Display for PeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown embedding {s:?}; expected ape, clpe, slpe or nope")))
    }
}

/// `y = W x + b` with `W` stored row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn random(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("positive std");
        Self {
            weight: (0..rows * cols).map(|_| dist.sample(rng)).collect(),
            ..Self::zeros(rows, cols)
        }
    }

    /// Identity plus Gaussian jitter.
    fn near_identity(n: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut a = Self::random(n, n, std, rng);
        for i in 0..n {
            a.weight[i * n + i] += 1.0;
        }
        a
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Affine) -> Vec<f64> {
        let mut dx = vec![0.0; self.cols];
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            let grow = &mut grad.weight[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                grow[c] += g * x[c];
                dx[c] += g * row[c];
            }
        }
        dx
    }

    fn check(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.rows != rows || self.cols != cols || self.weight.len() != rows * cols || self.bias.len() != rows {
            return Err(Error::shape(format!("{what} should be {rows}x{cols}")));
        }
        Ok(())
    }
}

/// Task head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Head {
    /// Each selected row goes through a shared ReLU layer (`hidden`); the
    /// rows are mean-pooled and mapped to class logits by `output`.
    Classifier { hidden: Affine, output: Affine },
    /// Per pixel, the `N`-band spectrum is `weight` (`N x K`) times the `K`
    /// selected values at that pixel plus the bias.
    Decoder { weight: Affine },
}

/// Sizes that fix a supernet's parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub task: TaskKind,
    pub pe_kind: PeKind,
    pub num_bands: usize,
    /// `H * W` of the input patches.
    pub sites: usize,
    pub k: usize,
    /// Classification only.
    pub num_classes: u16,
    /// Width of the classifier's shared layer.
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupernetParams {
    pub pe_kind: PeKind,
    pub task: TaskKind,
    pub num_bands: usize,
    pub sites: usize,
    pub k: usize,
    /// Spatial layer applied to every band row.
    pub mlp1: Affine,
    /// Second spatial layer (SLPE only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp2: Option<Affine>,
    /// `N x HW` embedding (APE, CLPE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_ss: Option<Vec<f64>>,
    /// Spatial embedding of length `HW` (SLPE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_p: Option<Vec<f64>>,
    /// Per-band offset of length `N` (SLPE).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_b: Option<Vec<f64>>,
    pub head: Head,
    /// Gradient steps taken so far.
    pub steps: u64,
    pub seed: u64,
}

/// Intermediate values of one encoded band row.
struct Token {
    band: usize,
    v: Option<Vec<f64>>,
    m: Vec<f64>,
}

impl SupernetParams {
    /// Random initialization; spatial layers start near the identity.
    pub fn init(shape: &ModelShape, seed: u64) -> Result<Self> {
        let ModelShape {
            task,
            pe_kind,
            num_bands: n,
            sites: hw,
            k,
            num_classes,
            hidden,
        } = *shape;
        if n == 0 || hw == 0 || k == 0 || k > n {
            return Err(Error::invalid(format!("bad supernet shape: N={n} HW={hw} K={k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = 0.1 / (hw as f64).sqrt();
        let mlp1 = Affine::near_identity(hw, jitter, &mut rng);
        let small = Normal::new(0.0, 0.1).expect("positive std");
        let embed = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..len).map(|_| small.sample(rng)).collect() };
        let (mut mlp2, mut e_ss, mut e_p, mut e_b) = (None, None, None, None);
        match pe_kind {
            PeKind::Ape => e_ss = Some(ape_embedding(n, hw)),
            PeKind::Clpe => e_ss = Some(embed(n * hw, &mut rng)),
            PeKind::Slpe => {
                mlp2 = Some(Affine::near_identity(hw, jitter, &mut rng));
                e_p = Some(embed(hw, &mut rng));
                e_b = Some(embed(n, &mut rng));
            }
            PeKind::Nope => {}
        }
        let head = match task {
            TaskKind::Classification => {
                if num_classes < 2 || hidden == 0 {
                    return Err(Error::invalid("classifier needs >= 2 classes and a non-empty hidden layer"));
                }
                let mut hidden_layer = Affine::random(hidden, hw, (2.0 / hw as f64).sqrt(), &mut rng);
                for b in hidden_layer.bias.iter_mut() {
                    *b = rng.random_range(-0.1..0.1);
                }
                Head::Classifier {
                    hidden: hidden_layer,
                    output: Affine::random(usize::from(num_classes), hidden, (1.0 / hidden as f64).sqrt(), &mut rng),
                }
            }
            TaskKind::Reconstruction => Head::Decoder {
                weight: Affine::random(n, k, (1.0 / k as f64).sqrt(), &mut rng),
            },
        };
        let params = Self {
            pe_kind,
            task,
            num_bands: n,
            sites: hw,
            k,
            mlp1,
            mlp2,
            e_ss,
            e_p,
            e_b,
            head,
            steps: 0,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn num_classes(&self) -> usize {
        match &self.head {
            Head::Classifier { output, .. } => output.rows,
            Head::Decoder { .. } => 0,
        }
    }

    /// Checks that shapes agree with each other and with `pe_kind`, and that
    /// every value is finite.
    pub fn validate(&self) -> Result<()> {
        let (n, hw) = (self.num_bands, self.sites);
        self.mlp1.check(hw, hw, "mlp1")?;
        let want = |present: bool, needed: bool, what: &str| -> Result<()> {
            if present != needed {
                return Err(Error::invalid(format!(
                    "{what} must {}be present for {}",
                    if needed { "" } else { "not " },
                    self.pe_kind
                )));
            }
            Ok(())
        };
        let slpe = self.pe_kind == PeKind::Slpe;
        want(self.mlp2.is_some(), slpe, "mlp2")?;
        want(self.e_p.is_some(), slpe, "e_p")?;
        want(self.e_b.is_some(), slpe, "e_b")?;
        want(self.e_ss.is_some(), matches!(self.pe_kind, PeKind::Ape | PeKind::Clpe), "e_ss")?;
        if let Some(m) = &self.mlp2 {
            m.check(hw, hw, "mlp2")?;
        }
        let len_ok = |v: &Option<Vec<f64>>, len: usize| v.as_ref().is_none_or(|v| v.len() == len);
        if !len_ok(&self.e_ss, n * hw) || !len_ok(&self.e_p, hw) || !len_ok(&self.e_b, n) {
            return Err(Error::shape("embedding sizes do not match N and HW"));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::invalid(format!("K={} outside 1..={n}", self.k)));
        }
        match (&self.head, self.task) {
            (Head::Classifier { hidden, output }, TaskKind::Classification) => {
                hidden.check(hidden.rows, hw, "classifier hidden layer")?;
                output.check(output.rows, hidden.rows, "classifier output layer")?;
            }
            (Head::Decoder { weight }, TaskKind::Reconstruction) => weight.check(n, self.k, "decoder")?,
            _ => return Err(Error::invalid("head does not match the task")),
        }
        if !self.all_values().all(f64::is_finite) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(())
    }

    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        let mut parts: Vec<&[f64]> = vec![&self.mlp1.weight, &self.mlp1.bias];
        if let Some(m) = &self.mlp2 {
            parts.extend([m.weight.as_slice(), m.bias.as_slice()]);
        }
        parts.extend([&self.e_ss, &self.e_p, &self.e_b].into_iter().flatten().map(Vec::as_slice));
        match &self.head {
            Head::Classifier { hidden, output } => {
                parts.extend([hidden.weight.as_slice(), &hidden.bias, &output.weight, &output.bias])
            }
            Head::Decoder { weight } => parts.extend([weight.weight.as_slice(), &weight.bias]),
        }
        parts.into_iter().flatten().copied()
    }

    /// Trainable tensors in a fixed order. The sinusoidal embedding is not
    /// trainable.
    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.mlp1.weight, &mut self.mlp1.bias];
        if let Some(m) = &mut self.mlp2 {
            out.push(&mut m.weight);
            out.push(&mut m.bias);
        }
        if self.pe_kind == PeKind::Clpe {
            out.extend(self.e_ss.as_mut());
        }
        out.extend(self.e_p.as_mut());
        out.extend(self.e_b.as_mut());
        match &mut self.head {
            Head::Classifier { hidden, output } => {
                out.extend([&mut hidden.weight, &mut hidden.bias, &mut output.weight, &mut output.bias])
            }
            Head::Decoder { weight } => out.extend([&mut weight.weight, &mut weight.bias]),
        }
        out
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub(crate) fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(e) = &mut z.e_ss {
            e.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.num_bands * self.sites {
            return Err(Error::shape(format!(
                "input has {} values, expected N x HW = {} x {}",
                input.len(),
                self.num_bands,
                self.sites
            )));
        }
        Ok(())
    }

    fn encode_band(&self, input: &[f64], band: usize) -> Token {
        let hw = self.sites;
        let x = &input[band * hw..(band + 1) * hw];
        let u = self.mlp1.apply(x);
        let (v, m) = match self.pe_kind {
            PeKind::Ape | PeKind::Clpe => {
                let e = &self.e_ss.as_ref().expect("validated")[band * hw..(band + 1) * hw];
                (None, u.iter().zip(e).map(|(a, b)| a + b).collect())
            }
            PeKind::Slpe => {
                let v: Vec<f64> = u.iter().zip(self.e_p.as_ref().expect("validated")).map(|(a, b)| a + b).collect();
                let eb = self.e_b.as_ref().expect("validated")[band];
                let m = self.mlp2.as_ref().expect("validated").apply(&v).into_iter().map(|y| y + eb).collect();
                (Some(v), m)
            }
            PeKind::Nope => (None, u),
        };
        Token { band, v, m }
    }

    /// Backpropagates `dm` through the encoder of one token.
    fn encode_backward(&self, input: &[f64], token: &Token, dm: &[f64], grad: &mut SupernetParams) {
        let hw = self.sites;
        let du = match self.pe_kind {
            PeKind::Ape => dm.to_vec(),
            PeKind::Clpe => {
                let ge = &mut grad.e_ss.as_mut().expect("validated")[token.band * hw..(token.band + 1) * hw];
                ge.iter_mut().zip(dm).for_each(|(g, d)| *g += d);
                dm.to_vec()
            }
            PeKind::Slpe => {
                grad.e_b.as_mut().expect("validated")[token.band] += dm.iter().sum::<f64>();
                let v = token.v.as_ref().expect("slpe token");
                let dv = self
                    .mlp2
                    .as_ref()
                    .expect("validated")
                    .backward(v, dm, grad.mlp2.as_mut().expect("validated"));
                grad.e_p.as_mut().expect("validated").iter_mut().zip(&dv).for_each(|(g, d)| *g += d);
                dv
            }
            PeKind::Nope => dm.to_vec(),
        };
        let x = &input[token.band * hw..(token.band + 1) * hw];
        self.mlp1.backward(x, &du, &mut grad.mlp1);
    }

    /// Classifier features of one encoded row: the shared layer's ReLU
    /// output.
    pub(crate) fn token_features(&self, m: &[f64]) -> Vec<f64> {
        match &self.head {
            Head::Classifier { hidden, .. } => hidden.apply(m).into_iter().map(|a| a.max(0.0)).collect(),
            Head::Decoder { .. } => panic!("token features are defined for the classifier only"),
        }
    }

    /// Class logits from pooled token features.
    pub(crate) fn logits_from_pooled(&self, g: &[f64]) -> Vec<f64> {
        match &self.head {
            Head::Classifier { output, .. } => output.apply(g),
            Head::Decoder { .. } => panic!("logits are defined for the classifier only"),
        }
    }

    /// Decoded `N x HW` spectra from the selected rows.
    pub(crate) fn decode(&self, rows: &[&[f64]]) -> Vec<f64> {
        let Head::Decoder { weight } = &self.head else {
            panic!("decoding is defined for the decoder only")
        };
        let (n, hw, k) = (self.num_bands, self.sites, rows.len());
        let mut out = vec![0.0; n * hw];
        for b in 0..n {
            let dst = &mut out[b * hw..(b + 1) * hw];
            dst.iter_mut().for_each(|v| *v = weight.bias[b]);
            for (j, row) in rows.iter().enumerate() {
                let w = weight.weight[b * k + j];
                dst.iter_mut().zip(row.iter()).for_each(|(d, r)| *d += w * r);
            }
        }
        out
    }

    fn check_bc(&self, bc: &BandCombination) -> Result<()> {
        bc.check_bands(self.num_bands)?;
        if matches!(self.head, Head::Decoder { .. }) && bc.len() != self.k {
            return Err(Error::invalid(format!("decoder expects {} bands, got {}", self.k, bc.len())));
        }
        if bc.is_empty() {
            return Err(Error::invalid("empty band combination"));
        }
        Ok(())
    }
}

/// Full encoded representation `E_H` (`N x HW`, row-major) of a band-major
/// input.
pub fn encode(params: &SupernetParams, input: &[f64]) -> Result<Vec<f64>> {
    params.check_input(input)?;
    Ok((0..params.num_bands).flat_map(|b| params.encode_band(input, b).m).collect())
}

/// Rows of `encoded` (`N x sites`) picked by `bc`, giving `K x sites`.
pub fn select_encoded(encoded: &[f64], sites: usize, bc: &BandCombination) -> Result<Vec<f64>> {
    if sites == 0 || !encoded.len().is_multiple_of(sites) {
        return Err(Error::shape("encoded matrix is not a whole number of rows"));
    }
    bc.check_bands(encoded.len() / sites)?;
    Ok(bc
        .indices()
        .iter()
        .flat_map(|&b| encoded[b * sites..(b + 1) * sites].iter().copied())
        .collect())
}

/// Class logits (classification) or the reconstructed band-major `N x HW`
/// spectra (reconstruction).
pub fn forward(params: &SupernetParams, input: &[f64], bc: &BandCombination) -> Result<Vec<f64>> {
    params.check_input(input)?;
    params.check_bc(bc)?;
    let tokens: Vec<Token> = bc.indices().iter().map(|&b| params.encode_band(input, b)).collect();
    Ok(match &params.head {
        Head::Classifier { .. } => {
            let g = pool(tokens.iter().map(|t| params.token_features(&t.m)));
            params.logits_from_pooled(&g)
        }
        Head::Decoder { .. } => params.decode(&tokens.iter().map(|t| t.m.as_slice()).collect::<Vec<_>>()),
    })
}

pub(crate) fn pool(features: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for f in features {
        if sum.is_empty() {
            sum = vec![0.0; f.len()];
        }
        sum.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
        count += 1;
    }
    sum.iter_mut().for_each(|s| *s /= count.max(1) as f64);
    sum
}

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    /// Cross-entropy for classification, MRAE for reconstruction.
    #[default]
    Task,
    /// Half squared error against one-hot targets or the input spectra.
    Squared,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Mean loss over `batch` and its gradient with respect to every trainable
/// parameter.
pub fn loss_and_grad(
    params: &SupernetParams,
    batch: &[&Sample],
    bc: &BandCombination,
    loss: Loss,
) -> Result<(f64, SupernetParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    params.check_bc(bc)?;
    let mut grad = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let (hw, k) = (params.sites, bc.len());
    for sample in batch {
        params.check_input(&sample.input)?;
        let tokens: Vec<Token> = bc.indices().iter().map(|&b| params.encode_band(&sample.input, b)).collect();
        let dms: Vec<Vec<f64>> = match (&params.head, &mut grad.head) {
            (Head::Classifier { hidden, output }, Head::Classifier { hidden: gh, output: go }) => {
                let pre: Vec<Vec<f64>> = tokens.iter().map(|t| hidden.apply(&t.m)).collect();
                let feats: Vec<Vec<f64>> = pre.iter().map(|a| a.iter().map(|v| v.max(0.0)).collect()).collect();
                let g = pool(feats.into_iter());
                let logits = output.apply(&g);
                let class = usize::from(sample.label)
                    .checked_sub(1)
                    .filter(|&c| c < logits.len())
                    .ok_or_else(|| Error::invalid(format!("class label {} outside 1..={}", sample.label, logits.len())))?;
                let dlogits: Vec<f64> = match loss {
                    Loss::Task => {
                        let p = softmax(&logits);
                        total += -p[class].max(f64::MIN_POSITIVE).ln() * scale;
                        p.iter().enumerate().map(|(c, pc)| (pc - f64::from(c == class)) * scale).collect()
                    }
                    Loss::Squared => logits
                        .iter()
                        .enumerate()
                        .map(|(c, l)| {
                            let d = l - f64::from(c == class);
                            total += 0.5 * d * d * scale;
                            d * scale
                        })
                        .collect(),
                };
                let dg = output.backward(&g, &dlogits, go);
                tokens
                    .iter()
                    .zip(&pre)
                    .map(|(t, a)| {
                        let da: Vec<f64> = a.iter().zip(&dg).map(|(&a, &d)| if a > 0.0 { d / k as f64 } else { 0.0 }).collect();
                        hidden.backward(&t.m, &da, gh)
                    })
                    .collect()
            }
            (Head::Decoder { .. }, Head::Decoder { weight: gw }) => {
                let rows: Vec<&[f64]> = tokens.iter().map(|t| t.m.as_slice()).collect();
                let out = params.decode(&rows);
                let entries = scale / out.len() as f64;
                let dout: Vec<f64> = out
                    .iter()
                    .zip(&sample.input)
                    .map(|(&o, &y)| match loss {
                        Loss::Task => {
                            let denom = y + MRAE_EPSILON;
                            total += (o - y).abs() / denom * entries;
                            (o - y).signum() / denom * entries
                        }
                        Loss::Squared => {
                            total += 0.5 * (o - y) * (o - y) * entries;
                            (o - y) * entries
                        }
                    })
                    .collect();
                let Head::Decoder { weight } = &params.head else { unreachable!() };
                let mut dms = vec![vec![0.0; hw]; k];
                for b in 0..params.num_bands {
                    let d = &dout[b * hw..(b + 1) * hw];
                    gw.bias[b] += d.iter().sum::<f64>();
                    for j in 0..k {
                        gw.weight[b * k + j] += d.iter().zip(rows[j]).map(|(x, y)| x * y).sum::<f64>();
                        let w = weight.weight[b * k + j];
                        dms[j].iter_mut().zip(d).for_each(|(m, x)| *m += w * x);
                    }
                }
                dms
            }
            _ => unreachable!("gradient mirrors parameter layout"),
        };
        for (t, dm) in tokens.iter().zip(&dms) {
            params.encode_backward(&sample.input, t, dm, &mut grad);
        }
    }
    Ok((total, grad))
}

/// Loss only; used by finite-difference checks.
pub fn loss_value(params: &SupernetParams, batch: &[&Sample], bc: &BandCombination, loss: Loss) -> Result<f64> {
    let mut total = 0.0;
    for sample in batch {
        let out = forward(params, &sample.input, bc)?;
        total += match (params.task, loss) {
            (TaskKind::Classification, Loss::Task) => {
                -softmax(&out)[usize::from(sample.label) - 1].max(f64::MIN_POSITIVE).ln()
            }
            (TaskKind::Classification, Loss::Squared) => out
                .iter()
                .enumerate()
                .map(|(c, l)| 0.5 * (l - f64::from(c + 1 == usize::from(sample.label))).powi(2))
                .sum(),
            (TaskKind::Reconstruction, Loss::Task) => mrae(&out, &sample.input)?,
            (TaskKind::Reconstruction, Loss::Squared) => {
                out.iter().zip(&sample.input).map(|(o, y)| 0.5 * (o - y) * (o - y)).sum::<f64>() / out.len() as f64
            }
        };
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn shape(task: TaskKind, pe_kind: PeKind) -> ModelShape {
        ModelShape {
            task,
            pe_kind,
            num_bands: 5,
            sites: 4,
            k: 3,
            num_classes: 3,
            hidden: 6,
        }
    }

    pub(crate) fn samples(count: usize, n: usize, hw: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| Sample {
                input: (0..n * hw).map(|_| rng.random_range(0.1..0.9)).collect(),
                label: (i % 3) as u16 + 1,
            })
            .collect()
    }

    fn zero_all(p: &mut SupernetParams) {
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(e) = &mut p.e_ss {
            e.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn bc(v: &[usize]) -> BandCombination {
        BandCombination::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_encoding_and_logits() {
        for pe in [PeKind::Clpe, PeKind::Slpe, PeKind::Nope] {
            let mut p = SupernetParams::init(&shape(TaskKind::Classification, pe), 1).unwrap();
            zero_all(&mut p);
            let x = &samples(1, 5, 4, 2)[0].input;
            assert!(encode(&p, x).unwrap().iter().all(|&v| v == 0.0));
            assert!(forward(&p, x, &bc(&[0, 2, 4])).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn slpe_identity_layers_on_zero_input() {
        let mut p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Slpe), 3).unwrap();
        for m in [&mut p.mlp1, p.mlp2.as_mut().unwrap()] {
            m.weight = (0..16).map(|i| f64::from(i % 5 == 0)).collect();
            m.bias = vec![0.0; 4];
        }
        let e = encode(&p, &[0.0; 20]).unwrap();
        let (ep, eb) = (p.e_p.clone().unwrap(), p.e_b.clone().unwrap());
        for i in 0..5 {
            for s in 0..4 {
                assert_relative_eq!(e[i * 4 + s], ep[s] + eb[i], epsilon = 1e-15);
            }
        }
    }

    /// Straight loops over the definitions.
    fn encode_oracle(p: &SupernetParams, x: &[f64]) -> Vec<f64> {
        let (n, hw) = (p.num_bands, p.sites);
        let mut out = vec![0.0; n * hw];
        for i in 0..n {
            for t in 0..hw {
                let mut u = p.mlp1.bias[t];
                for s in 0..hw {
                    u += p.mlp1.weight[t * hw + s] * x[i * hw + s];
                }
                out[i * hw + t] = u;
            }
            match p.pe_kind {
                PeKind::Ape | PeKind::Clpe => {
                    for t in 0..hw {
                        out[i * hw + t] += p.e_ss.as_ref().unwrap()[i * hw + t];
                    }
                }
                PeKind::Slpe => {
                    let m2 = p.mlp2.as_ref().unwrap();
                    let v: Vec<f64> = (0..hw).map(|t| out[i * hw + t] + p.e_p.as_ref().unwrap()[t]).collect();
                    for t in 0..hw {
                        let mut y = m2.bias[t] + p.e_b.as_ref().unwrap()[i];
                        for s in 0..hw {
                            y += m2.weight[t * hw + s] * v[s];
                        }
                        out[i * hw + t] = y;
                    }
                }
                PeKind::Nope => {}
            }
        }
        out
    }

    #[test]
    fn encoding_matches_loop_oracle() {
        for (seed, pe) in PeKind::ALL.into_iter().enumerate() {
            let p = SupernetParams::init(&shape(TaskKind::Classification, pe), seed as u64).unwrap();
            let x = &samples(1, 5, 4, 10 + seed as u64)[0].input;
            let got = encode(&p, x).unwrap();
            for (a, b) in got.iter().zip(encode_oracle(&p, x)) {
                assert_relative_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn selection_picks_rows() {
        let p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Slpe), 4).unwrap();
        let e = encode(&p, &samples(1, 5, 4, 5)[0].input).unwrap();
        assert_eq!(select_encoded(&e, 4, &bc(&[0, 1, 2, 3, 4])).unwrap(), e);
        assert_eq!(select_encoded(&e, 4, &bc(&[3])).unwrap(), e[12..16].to_vec());
        let m = select_encoded(&e, 4, &bc(&[1, 4])).unwrap();
        assert_eq!(&m[..4], &e[4..8]);
        assert_eq!(&m[4..], &e[16..20]);
        assert!(select_encoded(&e, 4, &bc(&[5])).is_err());
    }

    #[test]
    fn forward_is_pure_and_checks_shapes() {
        let p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Clpe), 6).unwrap();
        let x = &samples(1, 5, 4, 7)[0].input;
        let b = bc(&[1, 2, 3]);
        assert_eq!(forward(&p, x, &b).unwrap(), forward(&p, x, &b).unwrap());
        assert_eq!(forward(&p, x, &b).unwrap().len(), 3);
        assert!(forward(&p, &x[1..], &b).is_err());
    }

    #[test]
    fn init_gives_distinct_band_offsets() {
        let p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Slpe), 0).unwrap();
        let eb = p.e_b.unwrap();
        assert!(eb.iter().any(|&v| v != eb[0]));
    }

    #[test]
    fn validation_rejects_inconsistent_parameters() {
        let mut p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Slpe), 0).unwrap();
        p.e_ss = Some(vec![0.0; 20]);
        assert!(p.validate().is_err());
        let mut p = SupernetParams::init(&shape(TaskKind::Classification, PeKind::Clpe), 0).unwrap();
        p.mlp1.bias.pop();
        assert!(p.validate().is_err());
        let mut p = SupernetParams::init(&shape(TaskKind::Reconstruction, PeKind::Nope), 0).unwrap();
        p.mlp1.weight[0] = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn pe_kind_names_round_trip() {
        for k in PeKind::ALL {
            assert_eq!(k.to_string().parse::<PeKind>().unwrap(), k);
        }
        assert!("xyz".parse::<PeKind>().is_err());
    }
}
