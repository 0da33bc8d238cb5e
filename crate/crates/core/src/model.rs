//! One-hidden-layer perceptron trained with momentum SGD.
//!
//! `input -> dropout -> dense -> ReLU -> dense -> softmax`, cross-entropy
//! loss. Dropout acts on the input representation with inverted scaling.
//! Inputs are consumed through [`Features`], which lets sparse bit vectors
//! skip their zero coordinates in both passes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVector;
use crate::codec::EmbeddingVector;
use crate::error::{Error, Result};
use crate::ldp::Perturbed;
use crate::rng::RngSeed;

/// A labelled training example.
pub trait Features {
    fn label(&self) -> usize;
    fn dim(&self) -> usize;
    /// Calls `f(index, value)` for every coordinate that may be nonzero.
    fn for_each_active(&self, f: &mut dyn FnMut(usize, f64));
}

impl Features for EmbeddingVector {
    fn label(&self) -> usize {
        self.label
    }

    fn dim(&self) -> usize {
        self.values.len()
    }

    fn for_each_active(&self, f: &mut dyn FnMut(usize, f64)) {
        for (i, &v) in self.values.iter().enumerate() {
            f(i, v);
        }
    }
}

/// Bits enter the network as 0.0 / 1.0.
impl Features for BitVector {
    fn label(&self) -> usize {
        BitVector::label(self)
    }

    fn dim(&self) -> usize {
        self.len()
    }

    fn for_each_active(&self, f: &mut dyn FnMut(usize, f64)) {
        for i in self.iter_ones() {
            f(i, 1.0);
        }
    }
}

impl Features for Perturbed {
    fn label(&self) -> usize {
        Perturbed::label(self)
    }

    fn dim(&self) -> usize {
        self.bits().len()
    }

    fn for_each_active(&self, f: &mut dyn FnMut(usize, f64)) {
        self.bits().for_each_active(f)
    }
}

impl<T: Features + ?Sized> Features for &T {
    fn label(&self) -> usize {
        (**self).label()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn for_each_active(&self, f: &mut dyn FnMut(usize, f64)) {
        (**self).for_each_active(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    /// Time-based decay: the step-`t` learning rate is `lr / (1 + decay * t)`.
    pub decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl MlpConfig {
    /// 128 hidden units, dropout 0.5, SGD lr 0.01, decay 1e-6, momentum 0.9,
    /// batch 32, 50 epochs.
    pub fn sentiment(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_units: 128,
            num_classes,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            decay: 1e-6,
            momentum: 0.9,
            batch_size: 32,
            epochs: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_dim", self.input_dim),
            ("hidden_units", self.hidden_units),
            ("num_classes", self.num_classes),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::param(format!("{name} must be >= 1")));
            }
        }
        let rates = [
            ("dropout_rate", self.dropout_rate),
            ("momentum", self.momentum),
        ];
        for (name, v) in rates {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::param(format!(
                "decay must be >= 0, got {}",
                self.decay
            )));
        }
        Ok(())
    }
}

/// Parameter-shaped buffers: weights are row-major `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Params {
    fn zeros(c: &MlpConfig) -> Self {
        Self {
            w1: vec![0.0; c.input_dim * c.hidden_units],
            b1: vec![0.0; c.hidden_units],
            w2: vec![0.0; c.hidden_units * c.num_classes],
            b2: vec![0.0; c.num_classes],
        }
    }

    fn fill(&mut self, v: f64) {
        for s in self.slices_mut() {
            s.fill(v);
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values in a fixed order (`w1`, `b1`, `w2`, `b2`).
    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    config: MlpConfig,
    params: Params,
    velocity: Params,
    updates: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.params == other.params
            && self.velocity == other.velocity
            && self.updates == other.updates
    }
}

/// Per-example forward state kept for backprop.
struct Trace {
    active: Vec<(usize, f64)>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(config: MlpConfig, seed: RngSeed) -> Result<Self> {
        config.validate()?;
        let mut rng = seed.rng();
        let mut params = Params::zeros(&config);
        let glorot = |fan_in: usize, fan_out: usize| libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let bound1 = glorot(config.input_dim, config.hidden_units);
        for w in &mut params.w1 {
            *w = rng.random_range(-bound1..bound1);
        }
        let bound2 = glorot(config.hidden_units, config.num_classes);
        for w in &mut params.w2 {
            *w = rng.random_range(-bound2..bound2);
        }
        Ok(Self {
            velocity: Params::zeros(&config),
            config,
            params,
            updates: 0,
            rng,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Number of SGD updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Learning rate used by the next update.
    pub fn current_learning_rate(&self) -> f64 {
        self.config.learning_rate / (1.0 + self.config.decay * self.updates as f64)
    }

    fn check_width<T: Features>(&self, x: &T) -> Result<()> {
        if x.dim() != self.config.input_dim {
            return Err(Error::Shape {
                expected: self.config.input_dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    fn check_label<T: Features>(&self, x: &T) -> Result<()> {
        if x.label() >= self.config.num_classes {
            return Err(Error::param(format!(
                "label {} outside {} classes",
                x.label(),
                self.config.num_classes
            )));
        }
        Ok(())
    }

    /// Class probabilities for every row of `batch`.
    ///
    /// With `train_mode`, input dropout is sampled from the model's own RNG.
    pub fn forward<T: Features>(&mut self, batch: &[T], train_mode: bool) -> Result<Vec<Vec<f64>>> {
        batch.iter().try_for_each(|x| self.check_width(x))?;
        let mut out = Vec::with_capacity(batch.len());
        for x in batch {
            out.push(self.trace(x, train_mode).probs);
        }
        Ok(out)
    }

    /// Eval-mode probabilities for one example.
    pub fn predict_proba<T: Features>(&self, x: &T) -> Result<Vec<f64>> {
        self.check_width(x)?;
        let active = collect_active(x);
        Ok(self.propagate(active).probs)
    }

    pub fn predict<T: Features>(&self, x: &T) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    /// Hidden-layer pre-activations `x·W1 + b1` (before ReLU).
    pub fn hidden_pre_activation<T: Features>(
        &mut self,
        x: &T,
        train_mode: bool,
    ) -> Result<Vec<f64>> {
        self.check_width(x)?;
        let active = self.dropped_out(x, train_mode);
        Ok(self.pre_activation(&active))
    }

    fn dropped_out<T: Features>(&mut self, x: &T, train_mode: bool) -> Vec<(usize, f64)> {
        let mut active = collect_active(x);
        let rate = self.config.dropout_rate;
        if train_mode && rate > 0.0 {
            let scale = 1.0 / (1.0 - rate);
            let rng = &mut self.rng;
            active.retain_mut(|(_, v)| {
                let keep = rng.random::<f64>() >= rate;
                *v *= scale;
                keep
            });
        }
        active
    }

    fn trace<T: Features>(&mut self, x: &T, train_mode: bool) -> Trace {
        let active = self.dropped_out(x, train_mode);
        self.propagate(active)
    }

    fn pre_activation(&self, active: &[(usize, f64)]) -> Vec<f64> {
        let h = self.config.hidden_units;
        let mut hidden = self.params.b1.clone();
        for &(i, v) in active {
            let row = &self.params.w1[i * h..(i + 1) * h];
            for (acc, w) in hidden.iter_mut().zip(row) {
                *acc += v * w;
            }
        }
        hidden
    }

    fn propagate(&self, active: Vec<(usize, f64)>) -> Trace {
        let k = self.config.num_classes;
        let p = &self.params;
        let mut hidden = self.pre_activation(&active);
        for a in &mut hidden {
            *a = a.max(0.0);
        }
        let mut logits = p.b2.clone();
        for (j, &a) in hidden.iter().enumerate() {
            if a != 0.0 {
                let row = &p.w2[j * k..(j + 1) * k];
                for (acc, w) in logits.iter_mut().zip(row) {
                    *acc += a * w;
                }
            }
        }
        Trace {
            active,
            hidden,
            probs: softmax(&logits),
        }
    }

    /// Mean cross-entropy over `data` in eval mode.
    pub fn loss<T: Features>(&self, data: &[T]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::param("loss of an empty dataset"));
        }
        let mut total = 0.0;
        for x in data {
            self.check_label(x)?;
            total -= libm::log(self.predict_proba(x)?[x.label()]);
        }
        Ok(total / data.len() as f64)
    }

    /// Mean loss and its gradient over `batch`, with dropout disabled.
    pub fn gradient<T: Features>(&self, batch: &[T]) -> Result<(f64, Params)> {
        if batch.is_empty() {
            return Err(Error::param("gradient of an empty batch"));
        }
        let mut grad = Params::zeros(&self.config);
        let mut loss = 0.0;
        for x in batch {
            self.check_width(x)?;
            self.check_label(x)?;
            let trace = self.propagate(collect_active(x));
            loss += self.accumulate(&trace, x.label(), batch.len(), &mut grad);
        }
        Ok((loss / batch.len() as f64, grad))
    }

    /// Adds this example's share of the batch-mean gradient; returns its loss.
    fn accumulate(&self, trace: &Trace, label: usize, batch_len: usize, grad: &mut Params) -> f64 {
        let (h, k) = (self.config.hidden_units, self.config.num_classes);
        let inv = 1.0 / batch_len as f64;
        let mut d_logits = trace.probs.clone();
        d_logits[label] -= 1.0;
        for d in &mut d_logits {
            *d *= inv;
        }
        for (g, d) in grad.b2.iter_mut().zip(&d_logits) {
            *g += d;
        }
        let mut d_hidden = vec![0.0; h];
        for (j, &a) in trace.hidden.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let w_row = &self.params.w2[j * k..(j + 1) * k];
            let g_row = &mut grad.w2[j * k..(j + 1) * k];
            let mut back = 0.0;
            for ((g, w), d) in g_row.iter_mut().zip(w_row).zip(&d_logits) {
                *g += a * d;
                back += w * d;
            }
            // ReLU gate: only active units pass gradient.
            d_hidden[j] = back;
        }
        for (g, d) in grad.b1.iter_mut().zip(&d_hidden) {
            *g += d;
        }
        for &(i, v) in &trace.active {
            let g_row = &mut grad.w1[i * h..(i + 1) * h];
            for (g, d) in g_row.iter_mut().zip(&d_hidden) {
                *g += v * d;
            }
        }
        -libm::log(trace.probs[label])
    }

    /// One momentum step: `v <- mu*v - lr_t*g; theta <- theta + v`.
    pub fn apply_gradient(&mut self, grad: &Params) {
        let lr = self.current_learning_rate();
        let mu = self.config.momentum;
        let vs = self.velocity.slices_mut();
        let ps = self.params.slices_mut();
        for ((v, p), g) in vs.into_iter().zip(ps).zip(grad.slices()) {
            for ((vi, pi), gi) in v.iter_mut().zip(p.iter_mut()).zip(g) {
                *vi = mu * *vi - lr * gi;
                *pi += *vi;
            }
        }
        self.updates += 1;
    }

    /// Mini-batch training for `config.epochs` epochs, reshuffling with
    /// `seed` every epoch.
    pub fn train<T: Features>(&mut self, data: &[T], seed: RngSeed) -> Result<TrainHistory> {
        if data.is_empty() {
            return Err(Error::param("training data is empty"));
        }
        for x in data {
            self.check_width(x)?;
            self.check_label(x)?;
        }
        let mut history = TrainHistory::default();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut shuffle_rng = seed.rng();
        let mut grad = Params::zeros(&self.config);
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut shuffle_rng);
            let (mut loss_sum, mut correct) = (0.0, 0usize);
            for batch in order.chunks(self.config.batch_size) {
                grad.fill(0.0);
                let mut batch_loss = 0.0;
                for &idx in batch {
                    let x = &data[idx];
                    let trace = self.trace(x, true);
                    correct += usize::from(argmax(&trace.probs) == x.label());
                    batch_loss += self.accumulate(&trace, x.label(), batch.len(), &mut grad);
                }
                if !batch_loss.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        loss: batch_loss,
                    });
                }
                loss_sum += batch_loss;
                self.apply_gradient(&grad);
            }
            if !self.params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    loss: f64::NAN,
                });
            }
            history.loss.push(loss_sum / data.len() as f64);
            history.accuracy.push(correct as f64 / data.len() as f64);
        }
        Ok(history)
    }

    /// Top-1 accuracy with dropout disabled.
    pub fn evaluate<T: Features>(&self, data: &[T]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::param("evaluation data is empty"));
        }
        let mut correct = 0usize;
        for x in data {
            correct += usize::from(self.predict(x)? == x.label());
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

fn collect_active<T: Features>(x: &T) -> Vec<(usize, f64)> {
    let mut active = Vec::new();
    x.for_each_active(&mut |i, v| active.push((i, v)));
    active
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// First index of the maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
