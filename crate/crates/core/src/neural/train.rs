use serde::{Deserialize, Serialize};

use super::{Mode, NetError, Network, Tensor};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            lr_start: 1e-2,
            lr_end: 1e-4,
            momentum: 0.9,
            batch_size: 256,
        }
    }
}

impl TrainConfig {
    /// Geometric interpolation from `lr_start` (first epoch) to `lr_end`
    /// (last epoch).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(t)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.epochs == 0 || self.batch_size < 2 {
            return Err(NetError::Config("epochs must be ≥ 1 and batch size ≥ 2".into()));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(NetError::Config("learning rates must be positive and momentum in [0, 1)".into()));
        }
        Ok(())
    }
}

/// What the network output is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// Class indices; the output is read as logits under softmax
    /// cross-entropy.
    Classes { labels: &'a [usize], n_classes: usize },
    /// Regression targets under mean squared error.
    Values(&'a Tensor),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(t) => t.n,
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy of softmax(logits) and the gradient with respect to
/// the logits, `(p − onehot) / n`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> (f64, Tensor) {
    let k = logits.per_sample();
    let n = logits.n as f64;
    let mut grad = Tensor::zeros(logits.n, logits.c, logits.l);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = softmax(logits.sample(i));
        let max = logits.sample(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.sample(i).iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - logits.sample(i)[y];
        for (j, pj) in p.iter().enumerate() {
            grad.data[i * k + j] = (pj - if j == y { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// Mean over all elements of the squared error, and its gradient.
pub fn mean_squared_error(output: &Tensor, target: &Tensor) -> (f64, Tensor) {
    let m = output.data.len() as f64;
    let mut grad = output.clone();
    let mut loss = 0.0;
    for (g, t) in grad.data.iter_mut().zip(&target.data) {
        let d = *g - t;
        loss += d * d;
        *g = 2.0 * d / m;
    }
    (loss / m, grad)
}

fn loss_and_grad(out: &Tensor, targets: Targets, idx: &[usize]) -> Result<(f64, Tensor), NetError> {
    match targets {
        Targets::Classes { labels, n_classes } => {
            if out.per_sample() != n_classes {
                return Err(NetError::Shape(format!(
                    "network emits {} outputs for {n_classes} classes",
                    out.per_sample()
                )));
            }
            let batch: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            Ok(softmax_cross_entropy(out, &batch))
        }
        Targets::Values(t) => {
            let target = t.select(idx);
            if target.per_sample() != out.per_sample() {
                return Err(NetError::Shape("regression target width differs from network output".into()));
            }
            Ok(mean_squared_error(out, &target))
        }
    }
}

/// Momentum SGD: `v ← μv − η∇`, `w ← w + v`.
pub fn sgd_step(net: &mut Network, lr: f64, momentum: f64) {
    for p in net.params_mut() {
        for ((w, v), g) in p.value.iter_mut().zip(&mut p.velocity).zip(&p.grad) {
            *v = momentum * *v - lr * g;
            *w += *v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss of the first mini-batch before any update.
    pub initial_loss: f64,
    /// Sample-weighted mean mini-batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

/// Mini-batch index lists for one epoch. A trailing batch of a single
/// sample is merged into the previous one (batchnorm needs two).
pub fn batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().extend(last);
    }
    out
}

/// Trains `net` on all samples of `inputs` (one tensor per branch).
pub fn train(
    net: &mut Network,
    inputs: &[Tensor],
    targets: Targets,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainReport, NetError> {
    cfg.validate()?;
    let n = targets.len();
    if inputs.iter().any(|t| t.n != n) {
        return Err(NetError::Shape("inputs and targets differ in sample count".into()));
    }
    if n < 2 {
        return Err(NetError::BatchTooSmall(n));
    }
    if let Targets::Classes { labels, n_classes } = targets {
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(NetError::Label { label: bad, n_classes });
        }
        let mut counts = vec![0usize; n_classes];
        for &y in labels {
            counts[y] += 1;
        }
        for (c, &k) in counts.iter().enumerate() {
            if k == 0 {
                log::warn!("class {c} has no training samples");
            }
        }
    }
    let mut rng = Rng::new(seed, "shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport {
        initial_loss: f64::NAN,
        epoch_loss: Vec::with_capacity(cfg.epochs),
        learning_rates: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (b, idx) in batches(&order, cfg.batch_size).iter().enumerate() {
            let xs: Vec<Tensor> = inputs.iter().map(|t| t.select(idx)).collect();
            let out = net.forward(&xs, Mode::Train)?;
            let (loss, grad) = loss_and_grad(&out, targets, idx)?;
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, batch: b });
            }
            if epoch == 0 && b == 0 {
                report.initial_loss = loss;
            }
            total += loss * idx.len() as f64;
            net.zero_grad();
            net.backward(&grad)?;
            sgd_step(net, lr, cfg.momentum);
        }
        let mean = total / n as f64;
        log::debug!("epoch {}: loss {mean:.6} lr {lr:.3e}", epoch + 1);
        report.epoch_loss.push(mean);
        report.learning_rates.push(lr);
    }
    Ok(report)
}

/// Evaluation-mode forward pass in chunks.
pub fn predict_outputs(net: &mut Network, inputs: &[Tensor], chunk: usize) -> Result<Tensor, NetError> {
    let n = inputs.first().map_or(0, |t| t.n);
    let mut parts = Vec::new();
    let idx: Vec<usize> = (0..n).collect();
    for c in idx.chunks(chunk.max(1)) {
        let xs: Vec<Tensor> = inputs.iter().map(|t| t.select(c)).collect();
        parts.push(net.forward(&xs, Mode::Eval)?);
    }
    let (c, l) = parts.first().map_or((0, 0), |p| (p.c, p.l));
    let data = parts.into_iter().flat_map(|p| p.data).collect();
    Tensor::from_vec(n, c, l, data)
}

/// Per-sample class probabilities (rows sum to one).
pub fn predict_probabilities(net: &mut Network, inputs: &[Tensor]) -> Result<Vec<Vec<f64>>, NetError> {
    let logits = predict_outputs(net, inputs, 1024)?;
    Ok((0..logits.n).map(|i| softmax(logits.sample(i))).collect())
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
