//! Central finite-difference verification of the analytic gradients.
//!
//! Perturbations that move an activation across a leaky-ReLU or max-pool
//! kink make the difference quotient meaningless; such entries are skipped
//! and counted.

use serde::Serialize;

use super::layers::{BatchNorm, Conv1d, Dense, Dropout, Layer, LeakyRelu, MaxPool, Sigmoid, LEAKY_SLOPE};
use super::network::build_multibranch;
use super::train::softmax_cross_entropy;
use super::{Mode, NetError, Network, Tensor};
use crate::numerics::Rng;

pub const LAYER_TOLERANCE: f64 = 1e-5;
pub const NETWORK_TOLERANCE: f64 = 1e-4;
/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`.
pub const FLOOR: f64 = 1e-5;
pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_group: String,
    pub checked: usize,
    pub skipped: usize,
}

impl GradReport {
    fn empty() -> Self {
        GradReport {
            max_rel_error: 0.0,
            worst_group: String::new(),
            checked: 0,
            skipped: 0,
        }
    }

    fn merge(&mut self, other: GradReport) {
        if other.max_rel_error > self.max_rel_error || self.worst_group.is_empty() {
            self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
            self.worst_group = other.worst_group;
        }
        self.checked += other.checked;
        self.skipped += other.skipped;
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Scalar the gradients are taken of.
pub enum Objective {
    /// `Σ r_i · y_i` over the flattened output.
    Projection(Vec<f64>),
    /// Softmax cross-entropy of the output as logits.
    CrossEntropy(Vec<usize>),
}

impl Objective {
    fn eval(&self, out: &Tensor) -> (f64, Tensor) {
        match self {
            Objective::Projection(r) => {
                let v = out.data.iter().zip(r).map(|(a, b)| a * b).sum();
                let mut g = out.clone();
                g.data.copy_from_slice(r);
                (v, g)
            }
            Objective::CrossEntropy(labels) => softmax_cross_entropy(out, labels),
        }
    }

    /// `f(plus) − f(minus)`, accumulated term by term so the large common
    /// part of the two values cancels before summation.
    fn difference(&self, plus: &Tensor, minus: &Tensor) -> f64 {
        match self {
            Objective::Projection(r) => plus.data.iter().zip(&minus.data).zip(r).map(|((p, m), r)| r * (p - m)).sum(),
            Objective::CrossEntropy(labels) => {
                let per_sample = |t: &Tensor, i: usize| {
                    let z = t.sample(i);
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (max - z[labels[i]], z.iter().map(|v| (v - max).exp()).sum::<f64>().ln())
                };
                let total: f64 = (0..plus.n)
                    .map(|i| {
                        let (a, b) = per_sample(plus, i);
                        let (c, d) = per_sample(minus, i);
                        (a - c) + (b - d)
                    })
                    .sum();
                total / plus.n as f64
            }
        }
    }
}

fn param_names(net: &Network) -> Vec<String> {
    let mut names = Vec::new();
    for (li, l) in net.layers().enumerate() {
        let parts: &[&str] = match l {
            Layer::BatchNorm(_) => &["gamma", "beta"],
            _ => &["weight", "bias"],
        };
        for (j, _) in l.params().iter().enumerate() {
            names.push(format!("{}#{li}.{}", l.name(), parts[j]));
        }
    }
    names
}

/// Checks up to `per_group` randomly chosen entries of every parameter
/// group and of every input tensor.
pub fn check(
    net: &mut Network,
    inputs: &[Tensor],
    objective: &Objective,
    mode: Mode,
    per_group: usize,
    rng: &mut Rng,
) -> Result<GradReport, NetError> {
    let out = net.forward(inputs, mode)?;
    net.freeze_dropout(true);
    let base_pattern = net.kink_pattern();
    let (_, g) = objective.eval(&out);
    net.zero_grad();
    let input_grads = net.backward(&g)?;
    let param_grads: Vec<Vec<f64>> = net.params_mut().iter().map(|p| p.grad.clone()).collect();
    let names = param_names(net);

    let mut inputs = inputs.to_vec();
    let mut report = GradReport::empty();
    let n_groups = param_grads.len() + inputs.len();
    for group in 0..n_groups {
        let (len, name) = if group < param_grads.len() {
            (param_grads[group].len(), names[group].clone())
        } else {
            (inputs[group - param_grads.len()].data.len(), format!("input{}", group - param_grads.len()))
        };
        let entries: Vec<usize> = if len <= per_group {
            (0..len).collect()
        } else {
            (0..per_group).map(|_| rng.below(len)).collect()
        };
        let mut worst: f64 = 0.0;
        for e in entries {
            let get = |net: &mut Network, inputs: &mut Vec<Tensor>| -> f64 {
                if group < param_grads.len() {
                    net.params_mut()[group].value[e]
                } else {
                    inputs[group - param_grads.len()].data[e]
                }
            };
            let set = |net: &mut Network, inputs: &mut Vec<Tensor>, v: f64| {
                if group < param_grads.len() {
                    net.params_mut()[group].value[e] = v;
                } else {
                    inputs[group - param_grads.len()].data[e] = v;
                }
            };
            let x0 = get(net, &mut inputs);
            let h = STEP * x0.abs().max(1.0);
            let probe = |v: f64, net: &mut Network, inputs: &mut Vec<Tensor>| -> Result<(Tensor, bool), NetError> {
                set(net, inputs, v);
                let out = net.forward(inputs, mode)?;
                let same = net.kink_pattern() == base_pattern;
                Ok((out, same))
            };
            let (fp, ok_p) = probe(x0 + h, net, &mut inputs)?;
            let (fm, ok_m) = probe(x0 - h, net, &mut inputs)?;
            set(net, &mut inputs, x0);
            if !(ok_p && ok_m) {
                report.skipped += 1;
                continue;
            }
            let numeric = objective.difference(&fp, &fm) / (2.0 * h);
            let analytic = if group < param_grads.len() {
                param_grads[group][e]
            } else {
                input_grads[group - param_grads.len()].data[e]
            };
            worst = worst.max(relative_error(analytic, numeric));
            report.checked += 1;
        }
        report.merge(GradReport {
            max_rel_error: worst,
            worst_group: name,
            checked: 0,
            skipped: 0,
        });
    }
    net.freeze_dropout(false);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv1d,
    BatchNormTrain,
    BatchNormEval,
    LeakyRelu,
    MaxPool,
    Dense,
    Dropout,
    Sigmoid,
    SoftmaxCrossEntropy,
    DepthConcat,
}

impl LayerKind {
    pub const ALL: [LayerKind; 10] = [
        LayerKind::Conv1d,
        LayerKind::BatchNormTrain,
        LayerKind::BatchNormEval,
        LayerKind::LeakyRelu,
        LayerKind::MaxPool,
        LayerKind::Dense,
        LayerKind::Dropout,
        LayerKind::Sigmoid,
        LayerKind::SoftmaxCrossEntropy,
        LayerKind::DepthConcat,
    ];
}

fn random_tensor(n: usize, c: usize, l: usize, rng: &mut Rng) -> Tensor {
    Tensor::from_vec(n, c, l, (0..n * c * l).map(|_| rng.gaussian()).collect()).unwrap()
}

/// One randomly shaped instance (batch 2–4, channels 1–4, length 2–16).
pub fn check_layer(kind: LayerKind, seed: u64) -> Result<GradReport, NetError> {
    let mut rng = Rng::new(seed, &format!("gradcheck/{kind:?}"));
    let n = 2 + rng.below(3);
    let c = 1 + rng.below(4);
    let l = 2 + rng.below(15);
    let x = random_tensor(n, c, l, &mut rng);
    let mut mode = Mode::Train;
    let mut inputs = vec![x.clone()];
    let mut objective = None;
    let mut net = match kind {
        LayerKind::Conv1d => {
            let k = 1 + 2 * rng.below(4);
            let c_out = 1 + rng.below(4);
            let mut conv = Conv1d::new(c, c_out, k, &mut rng)?;
            for b in &mut conv.bias.value {
                *b = rng.gaussian();
            }
            Network::sequential(vec![Layer::Conv1d(conv)])
        }
        LayerKind::BatchNormTrain | LayerKind::BatchNormEval => {
            let mut bn = BatchNorm::new(c);
            for (g, b) in bn.gamma.value.iter_mut().zip(&mut bn.beta.value) {
                *g = rng.uniform_range(0.5, 2.0);
                *b = rng.gaussian();
            }
            if kind == LayerKind::BatchNormEval {
                bn.forward(&random_tensor(n, c, l, &mut rng), Mode::Train)?;
                mode = Mode::Eval;
            }
            Network::sequential(vec![Layer::BatchNorm(bn)])
        }
        LayerKind::LeakyRelu => Network::sequential(vec![Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE))]),
        LayerKind::MaxPool => Network::sequential(vec![Layer::MaxPool(MaxPool::default())]),
        LayerKind::Dense => {
            let mut d = Dense::new(c * l, 1 + rng.below(4), &mut rng);
            for b in &mut d.bias.value {
                *b = rng.gaussian();
            }
            Network::sequential(vec![Layer::Dense(d)])
        }
        LayerKind::Dropout => {
            let rate = rng.uniform_range(0.1, 0.7);
            Network::sequential(vec![Layer::Dropout(Dropout::new(rate, Rng::new(seed, "gradcheck/mask")))])
        }
        LayerKind::Sigmoid => Network::sequential(vec![Layer::Sigmoid(Sigmoid::default())]),
        LayerKind::SoftmaxCrossEntropy => {
            let classes = 2 + rng.below(4);
            inputs = vec![random_tensor(n, classes, 1, &mut rng)];
            objective = Some(Objective::CrossEntropy((0..n).map(|_| rng.below(classes)).collect()));
            Network::sequential(Vec::new())
        }
        LayerKind::DepthConcat => {
            let k = 2 + rng.below(3);
            inputs = (0..k).map(|_| random_tensor(n, 1 + rng.below(3), l, &mut rng)).collect();
            Network::new(vec![Vec::new(); k], Vec::new())
        }
    };
    let out_len = net.forward(&inputs, mode)?.data.len();
    let objective = objective.unwrap_or_else(|| Objective::Projection((0..out_len).map(|_| rng.gaussian()).collect()));
    check(&mut net, &inputs, &objective, mode, 64, &mut rng)
}

/// A two-branch network on length-32 signals, scored by cross-entropy.
pub fn check_toy_network(seed: u64) -> Result<GradReport, NetError> {
    let mut rng = Rng::new(seed, "gradcheck/network");
    let n = 2 + rng.below(3);
    let classes = 2 + rng.below(3);
    let mut net = build_multibranch(2, 32, classes, seed)?;
    // The classifier layer starts at zero, which would make every upstream
    // gradient vanish.
    if let Some(Layer::Dense(out)) = net.head.last_mut() {
        *out = Dense::new(out.n_in, out.n_out, &mut rng);
    }
    let inputs: Vec<Tensor> = (0..2).map(|_| random_tensor(n, 1, 32, &mut rng)).collect();
    let labels = (0..n).map(|_| rng.below(classes)).collect();
    check(&mut net, &inputs, &Objective::CrossEntropy(labels), Mode::Train, 8, &mut rng)
}

/// Worst report over `shapes` seeded instances of every layer kind.
pub fn layer_suite(seed: u64, shapes: usize) -> Result<Vec<(LayerKind, GradReport)>, NetError> {
    LayerKind::ALL
        .iter()
        .map(|&kind| {
            let mut agg = GradReport::empty();
            for s in 0..shapes {
                agg.merge(check_layer(kind, seed.wrapping_mul(1000).wrapping_add(s as u64))?);
            }
            Ok((kind, agg))
        })
        .collect()
}

pub fn network_suite(seed: u64, shapes: usize) -> Result<GradReport, NetError> {
    let mut agg = GradReport::empty();
    for s in 0..shapes {
        agg.merge(check_toy_network(seed.wrapping_mul(1000).wrapping_add(s as u64))?);
    }
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_passes() {
        for (kind, r) in layer_suite(1, 5).unwrap() {
            assert!(r.max_rel_error <= LAYER_TOLERANCE, "{kind:?}: {r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn toy_network_passes() {
        let r = check_toy_network(3).unwrap();
        assert!(r.max_rel_error <= NETWORK_TOLERANCE, "{r:?}");
    }

    #[test]
    fn relative_error_uses_the_floor() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error(1e-9, 0.0), 1e-4);
    }
}
