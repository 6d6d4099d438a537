//! A small fully connected classifier with hand-written backpropagation.
//!
//! ```text
//! x (H*W) -> W1,b1 -> ReLU -> W2,b2 = h (feature, D) -> W3,b3 = logits (C)
//! ```
//!
//! Softmax only appears inside the loss. Weight matrices are row-major
//! `out x in`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::numerics::{Matrix, Tensor2D};
use crate::{Error, Result, Rng};

pub const CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input: usize,
    pub hidden: usize,
    pub feature: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

pub const BLOCK_NAMES: [&str; 6] = ["w1", "b1", "w2", "b2", "w3", "b3"];

impl MlpParams {
    pub fn zeros(input: usize, hidden: usize, feature: usize, classes: usize) -> Self {
        MlpParams {
            input,
            hidden,
            feature,
            classes,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; feature * hidden],
            b2: vec![0.0; feature],
            w3: vec![0.0; classes * feature],
            b3: vec![0.0; classes],
        }
    }

    /// Uniform `(-s, s)` with `s = 1/sqrt(fan_in)` for every weight and bias,
    /// drawn block by block in declaration order.
    pub fn init(input: usize, hidden: usize, feature: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input, hidden, feature, classes);
        let fan_ins = [input, input, hidden, hidden, feature, feature];
        for (block, fan_in) in p.blocks_mut().into_iter().zip(fan_ins) {
            let s = 1.0 / libm::sqrt(fan_in as f64);
            for w in block.iter_mut() {
                *w = rng.uniform_range(-s, s);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input, self.hidden, self.feature, self.classes)
    }

    pub fn blocks(&self) -> [&[f64]; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = [
            self.hidden * self.input,
            self.hidden,
            self.feature * self.hidden,
            self.feature,
            self.classes * self.feature,
            self.classes,
        ];
        for ((block, len), name) in self.blocks().iter().zip(expected).zip(BLOCK_NAMES) {
            if block.len() != len {
                return Err(Error::invalid(format!("block {name} has {} entries, expected {len}", block.len())));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("block {name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Head weights `W3` as a `C x D` matrix.
    pub fn head(&self) -> Matrix {
        Matrix::new(self.classes, self.feature, self.w3.clone()).expect("head shape")
    }

    fn axpy(&mut self, k: f64, other: &MlpParams) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bias)| bias + crate::numerics::dot(&w[o * n_in..(o + 1) * n_in], x))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Feature representation `h` (penultimate layer).
    pub feature: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// Probability of the fake class.
    pub fn fake_score(&self) -> f64 {
        self.probabilities()[Label::Fake.index()]
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - m)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[label]`, via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: Label) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(logits.iter().map(|&z| libm::exp(z - m)).sum::<f64>());
    lse - logits[label.index()]
}

pub fn forward_values(p: &MlpParams, x: &[f64]) -> Result<ForwardTrace> {
    if x.len() != p.input {
        return Err(Error::invalid(format!("input of length {} for a model expecting {}", x.len(), p.input)));
    }
    let hidden_pre = affine(&p.w1, &p.b1, x);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
    let feature = affine(&p.w2, &p.b2, &hidden);
    let logits = affine(&p.w3, &p.b3, &feature);
    Ok(ForwardTrace { input: x.to_vec(), hidden_pre, hidden, feature, logits })
}

pub fn forward(p: &MlpParams, frame: &Tensor2D) -> Result<ForwardTrace> {
    forward_values(p, frame.values())
}

pub fn features(p: &MlpParams, frame: &Tensor2D) -> Result<Vec<f64>> {
    forward(p, frame).map(|t| t.feature)
}

/// Accumulates `scale * d(loss)/d(params)` for one trace given `d(loss)/d(logits)`.
fn backprop(p: &MlpParams, t: &ForwardTrace, dlogits: &[f64], grads: &mut MlpParams) {
    let (n_in, n_hid, n_feat) = (p.input, p.hidden, p.feature);
    let mut dfeat = vec![0.0; n_feat];
    for (c, &g) in dlogits.iter().enumerate() {
        grads.b3[c] += g;
        let row = &mut grads.w3[c * n_feat..(c + 1) * n_feat];
        for (d, &h) in row.iter_mut().zip(&t.feature) {
            *d += g * h;
        }
        for (df, &w) in dfeat.iter_mut().zip(&p.w3[c * n_feat..(c + 1) * n_feat]) {
            *df += g * w;
        }
    }
    let mut dhidden = vec![0.0; n_hid];
    for (f, &g) in dfeat.iter().enumerate() {
        grads.b2[f] += g;
        let row = &mut grads.w2[f * n_hid..(f + 1) * n_hid];
        for (d, &a) in row.iter_mut().zip(&t.hidden) {
            *d += g * a;
        }
        for (dh, &w) in dhidden.iter_mut().zip(&p.w2[f * n_hid..(f + 1) * n_hid]) {
            *dh += g * w;
        }
    }
    for (j, &g) in dhidden.iter().enumerate() {
        if t.hidden_pre[j] <= 0.0 || g == 0.0 {
            continue;
        }
        grads.b1[j] += g;
        let row = &mut grads.w1[j * n_in..(j + 1) * n_in];
        for (d, &x) in row.iter_mut().zip(&t.input) {
            *d += g * x;
        }
    }
}

/// Mean softmax cross-entropy over the batch and its exact gradient.
/// Samples are reduced in index order.
pub fn loss_and_grads(p: &MlpParams, batch: &[(&[f64], Label)]) -> Result<(f64, MlpParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let n = batch.len() as f64;
    let mut grads = p.zeros_like();
    let mut loss = 0.0;
    for &(x, label) in batch {
        let t = forward_values(p, x)?;
        loss += cross_entropy(&t.logits, label);
        let mut dlogits = softmax(&t.logits);
        dlogits[label.index()] -= 1.0;
        dlogits.iter_mut().for_each(|g| *g /= n);
        backprop(p, &t, &dlogits, &mut grads);
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch: 0, loss });
    }
    Ok((loss, grads))
}

/// `d(logit_fake - logit_real)/d(input)`, before any normalization.
pub fn input_gradient(p: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    let t = forward_values(p, x)?;
    let mut dlogits = vec![0.0; p.classes];
    dlogits[Label::Fake.index()] = 1.0;
    dlogits[Label::Real.index()] = -1.0;
    let mut dfeat = vec![0.0; p.feature];
    for (c, &g) in dlogits.iter().enumerate() {
        for (df, &w) in dfeat.iter_mut().zip(&p.w3[c * p.feature..(c + 1) * p.feature]) {
            *df += g * w;
        }
    }
    let mut dhidden = vec![0.0; p.hidden];
    for (f, &g) in dfeat.iter().enumerate() {
        for (dh, &w) in dhidden.iter_mut().zip(&p.w2[f * p.hidden..(f + 1) * p.hidden]) {
            *dh += g * w;
        }
    }
    let mut dx = vec![0.0; p.input];
    for (j, &g) in dhidden.iter().enumerate() {
        if t.hidden_pre[j] <= 0.0 || g == 0.0 {
            continue;
        }
        for (d, &w) in dx.iter_mut().zip(&p.w1[j * p.input..(j + 1) * p.input]) {
            *d += g * w;
        }
    }
    Ok(dx)
}

/// `|d(logit_fake - logit_real)/d(pixel)|`, min-max normalized to `[0, 1]`.
pub fn saliency_map(p: &MlpParams, frame: &Tensor2D) -> Result<Tensor2D> {
    let g = input_gradient(p, frame.values())?;
    Tensor2D::new(frame.height(), frame.width(), g.into_iter().map(libm::fabs).collect())
        .map(|t| t.min_max_normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub config: AdamConfig,
    pub first: MlpParams,
    pub second: MlpParams,
}

impl AdamState {
    pub fn new(like: &MlpParams) -> Self {
        AdamState {
            step: 0,
            config: AdamConfig::default(),
            first: like.zeros_like(),
            second: like.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(p: &mut MlpParams, grads: &MlpParams, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let AdamConfig { beta1, beta2, epsilon } = state.config;
    let c1 = 1.0 - libm::pow(beta1, state.step as f64);
    let c2 = 1.0 - libm::pow(beta2, state.step as f64);
    let blocks = p
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(state.first.blocks_mut().into_iter().zip(state.second.blocks_mut()));
    for ((params, g), (m, v)) in blocks {
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub feature_dim: usize,
    pub seed: u64,
    /// Stop when validation loss has not improved for this many epochs.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 10,
            learning_rate: 2e-4,
            hidden: 64,
            feature_dim: 32,
            seed: 42,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 || self.feature_dim == 0 {
            return Err(Error::Config("batch size and layer widths must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::Config("early-stop patience must be positive".into()));
        }
        Ok(())
    }
}

/// A flat view of labelled frames; frame-level samples.
#[derive(Debug, Clone, Default)]
pub struct LabeledFrames<'a> {
    pub frames: Vec<&'a Tensor2D>,
    pub labels: Vec<Label>,
}

impl<'a> LabeledFrames<'a> {
    pub fn from_videos<V>(videos: &'a [V], parts: impl Fn(&'a V) -> (&'a [Tensor2D], Label)) -> Self {
        let mut out = LabeledFrames::default();
        for v in videos {
            let (frames, label) = parts(v);
            for f in frames {
                out.frames.push(f);
                out.labels.push(label);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mean_loss(&self, p: &MlpParams) -> Result<f64> {
        let mut total = 0.0;
        for (f, &y) in self.frames.iter().zip(&self.labels) {
            total += cross_entropy(&forward(p, f)?.logits, y);
        }
        Ok(total / self.len().max(1) as f64)
    }
}

/// Per-batch input transformation applied before each parameter update.
pub trait BatchAugment {
    /// Replacement inputs for the frames at `batch` (indices into the training
    /// set), or `None` to train on the originals. Labels are never changed.
    fn augment(&mut self, params: &MlpParams, batch: &[usize], rng: &mut Rng) -> Result<Option<Vec<Tensor2D>>>;
}

pub struct NoAugment;

impl BatchAugment for NoAugment {
    fn augment(&mut self, _: &MlpParams, _: &[usize], _: &mut Rng) -> Result<Option<Vec<Tensor2D>>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Sample-weighted mean training loss per epoch.
    pub loss_history: Vec<f64>,
    pub validation_history: Vec<f64>,
    pub stopped_early: bool,
}

/// Mini-batch Adam training. Batch order comes from stream 1 of `cfg.seed`,
/// augmentation randomness from stream 2.
pub fn train(
    init: MlpParams,
    data: &LabeledFrames<'_>,
    cfg: &TrainConfig,
    hook: &mut dyn BatchAugment,
    validation: Option<&LabeledFrames<'_>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let root = Rng::new(cfg.seed);
    let mut order_rng = root.split(1);
    let mut aug_rng = root.split(2);
    let mut params = init;
    let mut adam = AdamState::new(&params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut validation_history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let replaced = hook.augment(&params, batch, &mut aug_rng)?;
            let inputs: Vec<(&[f64], Label)> = match &replaced {
                Some(frames) => frames
                    .iter()
                    .zip(batch)
                    .map(|(f, &i)| (f.values(), data.labels[i]))
                    .collect(),
                None => batch.iter().map(|&i| (data.frames[i].values(), data.labels[i])).collect(),
            };
            let (loss, grads) = loss_and_grads(&params, &inputs).map_err(|e| match e {
                Error::TrainingDiverged { loss, .. } => Error::TrainingDiverged { epoch, loss },
                other => other,
            })?;
            epoch_loss += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate);
        }
        loss_history.push(epoch_loss / data.len() as f64);

        if let (Some(val), Some(patience)) = (validation, cfg.early_stop_patience) {
            let v = val.mean_loss(&params)?;
            validation_history.push(v);
            if v < best_val {
                best_val = v;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { params, loss_history, validation_history, stopped_early })
}

impl MlpParams {
    /// `self += k * other`, block by block.
    pub fn add_scaled(&mut self, k: f64, other: &MlpParams) {
        self.axpy(k, other);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> MlpParams {
        MlpParams::init(6, 5, 4, 2, &mut Rng::new(seed))
    }

    fn random_input(n: usize, rng: &mut Rng) -> Vec<f64> {
        (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
    }

    #[test]
    fn zero_params_give_zero_logits_and_ln2_loss() {
        let p = MlpParams::zeros(4, 3, 2, 2);
        let x = [0.3, 0.1, 0.9, 0.2];
        let t = forward_values(&p, &x).unwrap();
        assert_eq!(t.logits, vec![0.0, 0.0]);
        let (loss, _) = loss_and_grads(&p, &[(&x, Label::Fake), (&x, Label::Real)]).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn head_product_by_hand() {
        // hidden = relu(x), h = hidden, logits = [[1,0],[0,2]] h + [0.5, -1]
        let mut p = MlpParams::zeros(2, 2, 2, 2);
        p.w1 = vec![1.0, 0.0, 0.0, 1.0];
        p.w2 = vec![1.0, 0.0, 0.0, 1.0];
        p.w3 = vec![1.0, 0.0, 0.0, 2.0];
        p.b3 = vec![0.5, -1.0];
        let t = forward_values(&p, &[3.0, -4.0]).unwrap();
        assert_eq!(t.feature, vec![3.0, 0.0]);
        assert_eq!(t.logits, vec![3.5, -1.0]);
    }

    #[test]
    fn forward_is_deterministic_and_checks_dims() {
        let p = tiny(1);
        let x = random_input(6, &mut Rng::new(2));
        assert_eq!(forward_values(&p, &x).unwrap(), forward_values(&p, &x).unwrap());
        assert!(forward_values(&p, &x[..5]).is_err());
    }

    #[test]
    fn duplicated_batch_is_equivalent() {
        let p = tiny(3);
        let mut rng = Rng::new(4);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_input(6, &mut rng)).collect();
        let labels = [Label::Real, Label::Fake, Label::Fake];
        let single: Vec<(&[f64], Label)> = xs.iter().zip(labels).map(|(x, y)| (x.as_slice(), y)).collect();
        let doubled: Vec<(&[f64], Label)> = single.iter().chain(single.iter()).cloned().collect();
        let (l1, g1) = loss_and_grads(&p, &single).unwrap();
        let (l2, g2) = loss_and_grads(&p, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.blocks().iter().zip(g2.blocks()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(loss_and_grads(&tiny(1), &[]).is_err());
    }

    #[test]
    fn non_finite_loss_reports_divergence() {
        let mut p = tiny(1);
        p.b3[0] = f64::NAN;
        let x = vec![0.0; 6];
        assert!(matches!(
            loss_and_grads(&p, &[(&x, Label::Real)]),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = tiny(5);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut s, 1e-3);
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr_times_sign() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut p = tiny(6);
        let before = p.clone();
        let mut g = p.zeros_like();
        let mut rng = Rng::new(7);
        for block in g.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.uniform_range(-2.0, 2.0);
            }
        }
        let lr = 2e-4;
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, lr);
        for ((after, orig), grad) in p.blocks().iter().zip(before.blocks()).zip(g.blocks()) {
            for i in 0..after.len() {
                let expected = lr * grad[i] / (grad[i].abs() + 1e-8);
                assert!(((orig[i] - after[i]) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adam_is_deterministic() {
        let p = tiny(8);
        let (_, g) = loss_and_grads(&p, &[(&[0.1; 6], Label::Fake)]).unwrap();
        let run = || {
            let mut q = p.clone();
            let mut s = AdamState::new(&q);
            adam_step(&mut q, &g, &mut s, 1e-3);
            adam_step(&mut q, &g, &mut s, 1e-3);
            q
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn saliency_of_zero_model_is_zero() {
        let p = MlpParams::zeros(16, 4, 3, 2);
        let frame = Tensor2D::from_fn(4, 4, |r, c| (r * 4 + c) as f64 / 16.0).unwrap();
        assert!(saliency_map(&p, &frame).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saliency_is_zero_where_weights_are_zero() {
        let mut p = MlpParams::init(16, 4, 3, 2, &mut Rng::new(9));
        // pixels 8.. never reach the hidden layer
        for j in 0..4 {
            for i in 8..16 {
                p.w1[j * 16 + i] = 0.0;
            }
            p.b1[j] = 1.0;
        }
        let frame = Tensor2D::from_fn(4, 4, |_, _| 0.5).unwrap();
        let s = saliency_map(&p, &frame).unwrap();
        assert!(s.values()[8..].iter().all(|&v| v == 0.0));
        assert!(s.values()[..8].iter().any(|&v| v > 0.0));
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let frames: Vec<Tensor2D> = (0..4).map(|i| Tensor2D::from_fn(2, 3, |_, _| i as f64).unwrap()).collect();
        let data = LabeledFrames {
            frames: frames.iter().collect(),
            labels: vec![Label::Real, Label::Fake, Label::Real, Label::Fake],
        };
        let init = MlpParams::init(6, 5, 4, 2, &mut Rng::new(1));
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let out = train(init.clone(), &data, &cfg, &mut NoAugment, None).unwrap();
        assert_eq!(out.params, init);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn training_is_seeded() {
        let mut rng = Rng::new(3);
        let frames: Vec<Tensor2D> = (0..40)
            .map(|_| Tensor2D::from_fn(2, 3, |_, _| rng.uniform()).unwrap())
            .collect();
        let labels: Vec<Label> = frames
            .iter()
            .map(|f| if f.values()[0] > 0.5 { Label::Fake } else { Label::Real })
            .collect();
        let data = LabeledFrames { frames: frames.iter().collect(), labels };
        let cfg = TrainConfig { epochs: 30, batch_size: 8, learning_rate: 1e-2, ..TrainConfig::default() };
        let init = MlpParams::init(6, 8, 4, 2, &mut Rng::new(1));
        let a = train(init.clone(), &data, &cfg, &mut NoAugment, None).unwrap();
        let b = train(init, &data, &cfg, &mut NoAugment, None).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_history.last().unwrap() < &a.loss_history[0]);
    }
}
