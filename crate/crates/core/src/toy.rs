//! A small, fully differentiable attention VQA model used to exercise the
//! attention-supervised loss end to end.
//!
//! Per grid cell the question projection is fused with the image feature by a
//! Hadamard product plus bias and a relu. A linear map turns the fused
//! feature into one logit per glimpse, and a softmax over cells gives each
//! glimpse's attention. The attended image features of all glimpses are
//! concatenated with the question vector and classified linearly.
//!
//! Everything is `f64` and gradients are derived by hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{
    kl_divergence, l1_normalize, rank_correlation, rasterize, round_sig9, AttentionMap, GlimpseStack, MapError,
};
use crate::dataset::BoundingBox;
use crate::schedule::{total_loss, LossBreakdown, Schedule, ScheduleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at step {0}")]
    Diverged(u64),
    #[error("training data is empty")]
    EmptyData,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Question feature length.
    pub d: usize,
    /// Image feature channels.
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub glimpses: usize,
    /// Answer classes.
    pub k: usize,
    /// Fusion width; equals `c` under Hadamard fusion.
    pub o: usize,
    pub seed: u64,
    pub steps: u64,
    pub learning_rate: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            d: 8,
            c: 16,
            h: 7,
            w: 7,
            glimpses: 2,
            k: 5,
            o: 16,
            seed: 7,
            steps: 1000,
            learning_rate: 0.2,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), ToyError> {
        let dims = [
            ("d", self.d),
            ("c", self.c),
            ("h", self.h),
            ("w", self.w),
            ("glimpses", self.glimpses),
            ("k", self.k),
            ("o", self.o),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ToyError::Config(format!("{name} must be at least 1")));
        }
        if self.o != self.c {
            return Err(ToyError::Config(format!(
                "Hadamard fusion needs o == c (o={}, c={})",
                self.o, self.c
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ToyError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }

    fn classifier_inputs(&self) -> usize {
        self.d + self.glimpses * self.c
    }
}

/// Trainable weights, each stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModelParams {
    pub cfg: ToyConfig,
    /// `c × d` question projection.
    pub w_q: Vec<f64>,
    /// `c` fusion bias.
    pub bias: Vec<f64>,
    /// `glimpses × c` attention projection.
    pub w_attn: Vec<f64>,
    /// `k × (d + glimpses·c)` classifier.
    pub w_cls: Vec<f64>,
}

/// Name and shape of every parameter tensor, in storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ToyModelParams {
    pub fn zeros(cfg: &ToyConfig) -> Self {
        ToyModelParams {
            cfg: cfg.clone(),
            w_q: vec![0.0; cfg.c * cfg.d],
            bias: vec![0.0; cfg.c],
            w_attn: vec![0.0; cfg.glimpses * cfg.c],
            w_cls: vec![0.0; cfg.k * cfg.classifier_inputs()],
        }
    }

    /// Uniform in `[-scale, scale]`.
    pub fn random(cfg: &ToyConfig, rng: &mut impl Rng, scale: f64) -> Self {
        let mut p = ToyModelParams::zeros(cfg);
        for t in p.tensors_mut() {
            t.iter_mut()
                .for_each(|v| *v = rng.random_range(-scale..=scale));
        }
        p
    }

    pub fn init(cfg: &ToyConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        ToyModelParams::random(cfg, &mut rng, 0.1)
    }

    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w_q, &self.bias, &self.w_attn, &self.w_cls]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w_q, &mut self.bias, &mut self.w_attn, &mut self.w_cls]
    }

    pub fn shapes(&self) -> [(&'static str, Vec<usize>); 4] {
        let c = &self.cfg;
        [
            ("w_q", vec![c.c, c.d]),
            ("bias", vec![c.c]),
            ("w_attn", vec![c.glimpses, c.c]),
            ("w_cls", vec![c.k, c.classifier_inputs()]),
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn named_arrays(&self) -> Vec<NamedArray> {
        self.shapes()
            .into_iter()
            .zip(self.tensors())
            .map(|((name, shape), values)| NamedArray {
                name: name.to_string(),
                shape,
                values: values.clone(),
            })
            .collect()
    }

    pub fn from_named_arrays(cfg: &ToyConfig, arrays: &[NamedArray]) -> Result<Self, ToyError> {
        let mut p = ToyModelParams::zeros(cfg);
        let shapes = p.shapes();
        for ((name, shape), slot) in shapes.into_iter().zip(p.tensors_mut()) {
            let found = arrays
                .iter()
                .find(|a| a.name == name)
                .ok_or_else(|| ToyError::Shape(format!("missing array {name}")))?;
            if found.shape != shape || found.values.len() != slot.len() {
                return Err(ToyError::Shape(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    found.shape
                )));
            }
            slot.copy_from_slice(&found.values);
        }
        Ok(p)
    }

    /// One JSON object per tensor, at full precision.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for a in self.named_arrays() {
            out.push_str(&serde_json::to_string(&a).expect("array serializes"));
            out.push('\n');
        }
        out
    }

    fn axpy(&mut self, scale: f64, other: &ToyModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySample {
    pub q_feat: Vec<f64>,
    /// Channel-major `c × (h·w)`: `img_feat[ch * cells + cell]`.
    pub img_feat: Vec<f64>,
    pub answer: usize,
    pub supervision: Option<GlimpseStack>,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `W_q · q`, length `c`.
    pub q_proj: Vec<f64>,
    /// Pre-activation fusion, cell-major `cells × c`.
    pub fused_pre: Vec<f64>,
    /// relu of `fused_pre`.
    pub fused: Vec<f64>,
    /// Attention weights, `glimpses × cells`.
    pub attn: Vec<f64>,
    /// Classifier input: `q` then the attended features.
    pub features: Vec<f64>,
    /// Softmax of the logits.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub attention: GlimpseStack,
    pub logits: Vec<f64>,
    pub cache: ForwardCache,
}

fn check_finite(values: &[f64], layer: &'static str) -> Result<(), ToyError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ToyError::NonFinite(layer))
    }
}

fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    xs.iter_mut().for_each(|x| *x /= sum);
}

fn check_sample(p: &ToyModelParams, s: &ToySample) -> Result<(), ToyError> {
    let cfg = &p.cfg;
    if s.q_feat.len() != cfg.d {
        return Err(ToyError::Shape(format!("q_feat has {} entries, expected {}", s.q_feat.len(), cfg.d)));
    }
    if s.img_feat.len() != cfg.c * cfg.cells() {
        return Err(ToyError::Shape(format!(
            "img_feat has {} entries, expected {}",
            s.img_feat.len(),
            cfg.c * cfg.cells()
        )));
    }
    if s.answer >= cfg.k {
        return Err(ToyError::Shape(format!("answer {} outside 0..{}", s.answer, cfg.k)));
    }
    if let Some(sup) = &s.supervision {
        let ok = sup.len() == cfg.glimpses && sup.glimpses.iter().all(|g| g.h == cfg.h && g.w == cfg.w);
        if !ok {
            return Err(ToyError::Shape("supervision does not match the attention shape".into()));
        }
    }
    Ok(())
}

pub fn forward(p: &ToyModelParams, s: &ToySample) -> Result<ForwardPass, ToyError> {
    check_sample(p, s)?;
    let cfg = &p.cfg;
    let (c, d, cells, g) = (cfg.c, cfg.d, cfg.cells(), cfg.glimpses);

    let q_proj: Vec<f64> = (0..c)
        .map(|i| (0..d).map(|j| p.w_q[i * d + j] * s.q_feat[j]).sum())
        .collect();

    let mut fused_pre = vec![0.0; cells * c];
    for n in 0..cells {
        for ch in 0..c {
            fused_pre[n * c + ch] = q_proj[ch] * s.img_feat[ch * cells + n] + p.bias[ch];
        }
    }
    check_finite(&fused_pre, "fusion")?;
    let fused: Vec<f64> = fused_pre.iter().map(|v| v.max(0.0)).collect();

    let mut attn = vec![0.0; g * cells];
    for gi in 0..g {
        let row = &mut attn[gi * cells..(gi + 1) * cells];
        for (n, slot) in row.iter_mut().enumerate() {
            *slot = (0..c).map(|ch| p.w_attn[gi * c + ch] * fused[n * c + ch]).sum();
        }
        check_finite(row, "attention logits")?;
        softmax_in_place(row);
    }

    let mut features = Vec::with_capacity(d + g * c);
    features.extend_from_slice(&s.q_feat);
    for gi in 0..g {
        let weights = &attn[gi * cells..(gi + 1) * cells];
        for ch in 0..c {
            let plane = &s.img_feat[ch * cells..(ch + 1) * cells];
            features.push(weights.iter().zip(plane).map(|(a, v)| a * v).sum());
        }
    }

    let width = features.len();
    let logits: Vec<f64> = (0..cfg.k)
        .map(|k| p.w_cls[k * width..(k + 1) * width].iter().zip(&features).map(|(w, f)| w * f).sum())
        .collect();
    check_finite(&logits, "classifier")?;
    let mut probs = logits.clone();
    softmax_in_place(&mut probs);

    let glimpses = (0..g)
        .map(|gi| {
            let mut m = AttentionMap::from_values(cfg.h, cfg.w, attn[gi * cells..(gi + 1) * cells].to_vec())?;
            m.normalized = true;
            Ok(m)
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    Ok(ForwardPass {
        attention: GlimpseStack::unmasked(glimpses)?,
        logits,
        cache: ForwardCache {
            q_proj,
            fused_pre,
            fused,
            attn,
            features,
            probs,
        },
    })
}

/// `-ln softmax(logits)[answer]`, computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], answer: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[answer]
}

/// Loss and its exact gradient for a given attention weight.
pub fn loss_and_grads_with_alpha(
    p: &ToyModelParams,
    s: &ToySample,
    alpha: f64,
) -> Result<(LossBreakdown, ToyModelParams, ForwardPass), ToyError> {
    let fp = forward(p, s)?;
    let cfg = &p.cfg;
    let (c, d, cells, g, k) = (cfg.c, cfg.d, cfg.cells(), cfg.glimpses, cfg.k);
    let cache = &fp.cache;

    let ce = cross_entropy(&fp.logits, s.answer);
    let (kl, alpha) = match &s.supervision {
        Some(sup) => (Some(kl_divergence(sup, &fp.attention)?), alpha),
        None => (None, 0.0),
    };
    let loss = LossBreakdown {
        ce,
        kl: kl.unwrap_or(0.0),
        alpha,
        total: ce + alpha * kl.unwrap_or(0.0),
    };
    if !loss.total.is_finite() {
        return Err(ToyError::NonFinite("loss"));
    }

    let mut grads = ToyModelParams::zeros(cfg);
    let width = cache.features.len();

    // Classifier.
    let mut d_logits = cache.probs.clone();
    d_logits[s.answer] -= 1.0;
    let mut d_features = vec![0.0; width];
    for ki in 0..k {
        let row = ki * width;
        for j in 0..width {
            grads.w_cls[row + j] = d_logits[ki] * cache.features[j];
            d_features[j] += p.w_cls[row + j] * d_logits[ki];
        }
    }

    // Attention logits: through the attended features, plus the KL term.
    let mut d_scores = vec![0.0; g * cells];
    for gi in 0..g {
        let weights = &cache.attn[gi * cells..(gi + 1) * cells];
        let d_attended = &d_features[d + gi * c..d + (gi + 1) * c];
        let d_weights: Vec<f64> = (0..cells)
            .map(|n| (0..c).map(|ch| d_attended[ch] * s.img_feat[ch * cells + n]).sum())
            .collect();
        let dot: f64 = weights.iter().zip(&d_weights).map(|(a, b)| a * b).sum();
        let out = &mut d_scores[gi * cells..(gi + 1) * cells];
        for n in 0..cells {
            out[n] = weights[n] * (d_weights[n] - dot);
        }
        if let Some(sup) = &s.supervision {
            if alpha != 0.0 && sup.mask[gi] {
                let target = &sup.glimpses[gi].values;
                let mass: f64 = target.iter().sum();
                for n in 0..cells {
                    out[n] += alpha * (weights[n] * mass - target[n]);
                }
            }
        }
    }

    // Attention projection and fused features.
    let mut d_fused = vec![0.0; cells * c];
    for gi in 0..g {
        for n in 0..cells {
            let ds = d_scores[gi * cells + n];
            for ch in 0..c {
                grads.w_attn[gi * c + ch] += ds * cache.fused[n * c + ch];
                d_fused[n * c + ch] += ds * p.w_attn[gi * c + ch];
            }
        }
    }

    // relu, bias and question projection.
    let mut d_q_proj = vec![0.0; c];
    for n in 0..cells {
        for ch in 0..c {
            if cache.fused_pre[n * c + ch] > 0.0 {
                let dz = d_fused[n * c + ch];
                grads.bias[ch] += dz;
                d_q_proj[ch] += dz * s.img_feat[ch * cells + n];
            }
        }
    }
    for ch in 0..c {
        for j in 0..d {
            grads.w_q[ch * d + j] = d_q_proj[ch] * s.q_feat[j];
        }
    }

    Ok((loss, grads, fp))
}

pub fn loss_and_grads(
    p: &ToyModelParams,
    s: &ToySample,
    sched: &Schedule,
    t: u64,
) -> Result<(LossBreakdown, ToyModelParams), ToyError> {
    let alpha = sched.alpha(t);
    let (mut loss, grads, _) = loss_and_grads_with_alpha(p, s, alpha)?;
    // Same composition as the standalone loss helper, including the NaN guard.
    loss = total_loss(loss.ce, s.supervision.as_ref().map(|_| loss.kl), sched, t)?;
    Ok((loss, grads))
}

/// Averages over the training set at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: u64,
    pub ce: f64,
    pub kl: f64,
    pub alpha: f64,
    pub accuracy: f64,
    /// Mean Spearman correlation between predicted and target glimpse 0;
    /// NaN when no sample has a usable target.
    pub rank_corr: f64,
}

#[derive(Debug, Default)]
struct MetricAcc {
    ce: f64,
    kl: f64,
    supervised: usize,
    correct: usize,
    corr: f64,
    corr_n: usize,
    total: usize,
}

impl MetricAcc {
    fn add(&mut self, s: &ToySample, loss: &LossBreakdown, fp: &ForwardPass) {
        self.total += 1;
        self.ce += loss.ce;
        let predicted = fp
            .logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i);
        self.correct += usize::from(predicted == Some(s.answer));
        if let Some(sup) = &s.supervision {
            self.supervised += 1;
            self.kl += loss.kl;
            if sup.mask[0] {
                if let Ok(r) = rank_correlation(&fp.attention.glimpses[0], &sup.glimpses[0]) {
                    self.corr += r;
                    self.corr_n += 1;
                }
            }
        }
    }

    fn finish(&self, step: u64, alpha: f64) -> StepMetrics {
        let n = self.total as f64;
        StepMetrics {
            step,
            ce: self.ce / n,
            kl: if self.supervised > 0 { self.kl / self.supervised as f64 } else { 0.0 },
            alpha,
            accuracy: self.correct as f64 / n,
            rank_corr: if self.corr_n > 0 { self.corr / self.corr_n as f64 } else { f64::NAN },
        }
    }
}

/// Mean loss gradient over the whole set, plus metrics at the current params.
fn full_batch(
    p: &ToyModelParams,
    data: &[ToySample],
    alpha: f64,
    step: u64,
) -> Result<(ToyModelParams, StepMetrics), ToyError> {
    let mut grad = ToyModelParams::zeros(&p.cfg);
    let mut acc = MetricAcc::default();
    for s in data {
        let (loss, g, fp) = loss_and_grads_with_alpha(p, s, alpha).map_err(|e| match e {
            ToyError::NonFinite(_) => ToyError::Diverged(step),
            other => other,
        })?;
        grad.axpy(1.0, &g);
        acc.add(s, &loss, &fp);
    }
    let scale = 1.0 / data.len() as f64;
    grad.tensors_mut()
        .into_iter()
        .for_each(|t| t.iter_mut().for_each(|v| *v *= scale));
    Ok((grad, acc.finish(step, alpha)))
}

pub fn evaluate(p: &ToyModelParams, data: &[ToySample], alpha: f64, step: u64) -> Result<StepMetrics, ToyError> {
    if data.is_empty() {
        return Err(ToyError::EmptyData);
    }
    Ok(full_batch(p, data, alpha, step)?.1)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ToyModelParams,
    /// One row per step `0..=steps`, each measured before that step's update.
    pub metrics: Vec<StepMetrics>,
}

/// Full-batch gradient descent for `cfg.steps` steps.
pub fn train(data: &[ToySample], cfg: &ToyConfig, sched: &Schedule) -> Result<TrainOutput, ToyError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ToyError::EmptyData);
    }
    let mut params = ToyModelParams::init(cfg);
    let mut metrics = Vec::with_capacity(cfg.steps as usize + 1);
    for t in 0..cfg.steps {
        let alpha = sched.alpha(t);
        let (grad, m) = full_batch(&params, data, alpha, t)?;
        metrics.push(m);
        params.axpy(-cfg.learning_rate, &grad);
        if !params.all_finite() {
            return Err(ToyError::Diverged(t));
        }
    }
    metrics.push(evaluate(&params, data, sched.alpha(cfg.steps), cfg.steps)?);
    Ok(TrainOutput { params, metrics })
}

pub fn metrics_to_csv(metrics: &[StepMetrics]) -> String {
    let mut out = String::from("step,ce,kl,alpha,accuracy,rank_corr\n");
    for m in metrics {
        let f = |v: f64| {
            if v.is_nan() {
                "nan".to_string()
            } else {
                round_sig9(v).to_string()
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.step,
            f(m.ce),
            f(m.kl),
            f(m.alpha),
            f(m.accuracy),
            f(m.rank_corr)
        ));
    }
    out
}

/// Target stack for a planted grid box: every glimpse is the box's
/// normalized rasterization.
pub fn planted_supervision(bbox: BoundingBox, h: usize, w: usize, glimpses: usize) -> Result<GlimpseStack, ToyError> {
    let map = l1_normalize(&rasterize(&[bbox], w as u32, h as u32, h, w)?)?;
    Ok(GlimpseStack::unmasked(vec![map; glimpses])?)
}

fn random_box(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BoundingBox {
    // Sides from 2 up to half the grid, so a box spans several cells.
    let side = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(2.min(n)..=(n / 2).max(2).min(n));
    let bh = side(rng, h);
    let bw = side(rng, w);
    let y = rng.random_range(0..=h - bh);
    let x = rng.random_range(0..=w - bw);
    BoundingBox::new(x as u32, y as u32, (x + bw - 1) as u32, (y + bh - 1) as u32)
}

fn cell_in(b: &BoundingBox, y: usize, x: usize) -> bool {
    b.contains_point(x as f64, y as f64)
}

/// Whether a box cell shows the box's class. The top-left cell always does.
fn evidence(rng: &mut ChaCha8Rng, b: &BoundingBox, y: usize, x: usize) -> bool {
    (x as u32, y as u32) == (b.x_min, b.y_min) || rng.random_bool(EVIDENCE_RATE)
}

const EVIDENCE_RATE: f64 = 0.35;
const NOISE: f64 = 0.1;

/// Synthetic attention task. The question asks about one of two boxes and
/// the answer is the class shown inside that box. The other box shows a
/// different class and background cells show random classes, so the answer
/// can only be read reliably by attending to the named box. Supervision is
/// the named box.
///
/// Channel layout: the first half of the `c - k` non-class channels carry a
/// marker sign, +1 inside one box and -1 inside the other, and question
/// feature 0 holds the sign asked about, so the fused product is positive
/// only on the named box. Question feature 1 is a constant. Only some cells
/// of the named box show its class and marker; the rest carry the remaining
/// non-class channels instead, like parts of an object that say nothing
/// about the answer. The answer loss has no reason to rank those cells above
/// the background, while the attention target covers them.
///
/// Needs `d ≥ 2` and `c ≥ k + 2`.
pub fn make_synthetic(cfg: &ToyConfig, n: usize, seed: u64) -> Result<Vec<ToySample>, ToyError> {
    cfg.validate()?;
    if cfg.d < 2 || cfg.c < cfg.k + 2 {
        return Err(ToyError::Config(format!(
            "synthetic task needs d >= 2 and c >= k + 2 (got d={}, c={}, k={})",
            cfg.d, cfg.c, cfg.k
        )));
    }
    if n == 0 {
        return Err(ToyError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, c, k) = (cfg.h, cfg.w, cfg.c, cfg.k);
    let cells = h * w;
    let markers = (c - k).div_ceil(2);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let answer = rng.random_range(0..k);
        let other_class = if k > 1 { (answer + rng.random_range(1..k)) % k } else { answer };
        let target = random_box(&mut rng, h, w);
        let mut distractor = None;
        for _ in 0..64 {
            let b = random_box(&mut rng, h, w);
            if b.intersection_area(&target) == 0 {
                distractor = Some(b);
                break;
            }
        }

        let mut img = vec![0.0; c * cells];
        for y in 0..h {
            for x in 0..w {
                let cell = y * w + x;
                // (class shown, marker sign, inside a box)
                let (class, mark, body) = if cell_in(&target, y, x) {
                    let shown = evidence(&mut rng, &target, y, x);
                    if shown { (Some(answer), sign, 0.0) } else { (None, 0.0, 1.0) }
                } else if distractor.is_some_and(|b| cell_in(&b, y, x)) {
                    (Some(other_class), -sign, 0.0)
                } else {
                    (Some(rng.random_range(0..k)), 0.0, 0.0)
                };
                for ch in 0..markers {
                    img[ch * cells + cell] = mark;
                }
                for ch in markers..c - k {
                    img[ch * cells + cell] = body;
                }
                if let Some(class) = class {
                    img[(c - k + class) * cells + cell] = 1.0;
                }
                for ch in 0..c {
                    img[ch * cells + cell] += rng.random_range(-NOISE..=NOISE);
                }
            }
        }

        let mut q = vec![0.0; cfg.d];
        q[0] = sign;
        q[1] = 1.0;
        for v in q.iter_mut().skip(2) {
            *v = rng.random_range(-0.1..=0.1);
        }
        out.push(ToySample {
            q_feat: q,
            img_feat: img,
            answer,
            supervision: Some(planted_supervision(target, h, w, cfg.glimpses)?),
        });
    }
    Ok(out)
}
