use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv1d, Dense, Dropout, Layer, LeakyRelu, MaxPool, Param, Sigmoid, LEAKY_SLOPE};
use super::{Mode, NetError, Tensor};
use crate::numerics::Rng;

pub const MAX_BRANCHES: usize = 4;
pub const HIDDEN_UNITS: usize = 172;
pub const DROPOUT_RATE: f64 = 0.5;

/// Parallel branch stacks whose outputs are depth-concatenated and fed to
/// a shared head. Plain feed-forward nets have one empty branch.
#[derive(Debug, Clone)]
pub struct Network {
    pub branches: Vec<Vec<Layer>>,
    pub head: Vec<Layer>,
    branch_channels: Option<Vec<usize>>,
}

fn run(layers: &mut [Layer], x: &Tensor, mode: Mode) -> Result<Tensor, NetError> {
    let mut cur = x.clone();
    for l in layers {
        cur = l.forward(&cur, mode)?;
    }
    Ok(cur)
}

fn run_back(layers: &mut [Layer], g: &Tensor) -> Result<Tensor, NetError> {
    let mut cur = g.clone();
    for l in layers.iter_mut().rev() {
        cur = l.backward(&cur)?;
    }
    Ok(cur)
}

impl Network {
    pub fn new(branches: Vec<Vec<Layer>>, head: Vec<Layer>) -> Self {
        Network {
            branches,
            head,
            branch_channels: None,
        }
    }

    pub fn sequential(layers: Vec<Layer>) -> Self {
        Network::new(vec![Vec::new()], layers)
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Branch outputs, before concatenation.
    pub fn forward_branches(&mut self, inputs: &[Tensor], mode: Mode) -> Result<Vec<Tensor>, NetError> {
        if inputs.len() != self.branches.len() {
            return Err(NetError::Shape(format!(
                "network has {} branches but got {} inputs",
                self.branches.len(),
                inputs.len()
            )));
        }
        self.branches
            .iter_mut()
            .zip(inputs)
            .map(|(b, x)| run(b, x, mode))
            .collect()
    }

    /// Output of the depth-concatenation layer.
    pub fn forward_concat(&mut self, inputs: &[Tensor], mode: Mode) -> Result<Tensor, NetError> {
        let outs = self.forward_branches(inputs, mode)?;
        self.branch_channels = Some(outs.iter().map(|t| t.c).collect());
        Tensor::concat_channels(&outs)
    }

    /// Logits (pre-softmax) or, for regression nets, raw outputs.
    pub fn forward(&mut self, inputs: &[Tensor], mode: Mode) -> Result<Tensor, NetError> {
        let merged = self.forward_concat(inputs, mode)?;
        run(&mut self.head, &merged, mode)
    }

    /// Backpropagates the gradient of the output; returns the gradient with
    /// respect to each branch input. Parameter gradients accumulate.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Vec<Tensor>, NetError> {
        let sizes = self.branch_channels.clone().ok_or(NetError::NoForwardPass("network"))?;
        let g = run_back(&mut self.head, grad)?;
        let parts = g.split_channels(&sizes);
        self.branches
            .iter_mut()
            .zip(&parts)
            .map(|(b, g)| run_back(b, g))
            .collect()
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.branches.iter().flatten().chain(&self.head)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.branches.iter_mut().flatten().chain(self.head.iter_mut())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().flat_map(|l| l.params()).map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for l in self.layers() {
            l.pattern(&mut out);
        }
        out
    }

    pub fn freeze_dropout(&mut self, frozen: bool) {
        for l in self.layers_mut() {
            l.freeze_dropout(frozen);
        }
    }

    pub fn blobs(&self) -> Vec<Vec<f64>> {
        self.layers().flat_map(|l| l.blobs()).collect()
    }

    pub fn load_blobs(&mut self, blobs: Vec<Vec<f64>>) -> Result<(), NetError> {
        let mut it = blobs.into_iter();
        for l in self.layers_mut() {
            l.load_blobs(&mut it)?;
        }
        if it.next().is_some() {
            return Err(NetError::Checkpoint("more parameter blobs than the architecture has".into()));
        }
        Ok(())
    }
}

/// One convolutional branch: two conv → batchnorm → leaky ReLU → maxpool
/// blocks (16 filters of width 15, then 32 of width 11).
pub fn cnn_branch(rng: &mut Rng) -> Result<Vec<Layer>, NetError> {
    Ok(vec![
        Layer::Conv1d(Conv1d::new(1, 16, 15, rng)?),
        Layer::BatchNorm(BatchNorm::new(16)),
        Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE)),
        Layer::MaxPool(MaxPool::default()),
        Layer::Conv1d(Conv1d::new(16, 32, 11, rng)?),
        Layer::BatchNorm(BatchNorm::new(32)),
        Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE)),
        Layer::MaxPool(MaxPool::default()),
    ])
}

/// Length of a branch output for a given input length.
pub fn branch_output_len(input_len: usize) -> usize {
    input_len / 2 / 2
}

/// `K` branches over signals of length `input_len`, concatenated and
/// classified by fc(172) → leaky ReLU → dropout(0.5) → fc(n_classes).
/// Every branch and layer draws its initial weights from its own labelled
/// stream of `seed`; the output layer starts at zero.
pub fn build_multibranch(k: usize, input_len: usize, n_classes: usize, seed: u64) -> Result<Network, NetError> {
    if !(1..=MAX_BRANCHES).contains(&k) {
        return Err(NetError::Shape(format!("branch count {k} outside 1..={MAX_BRANCHES}")));
    }
    let out_len = branch_output_len(input_len);
    if out_len == 0 {
        return Err(NetError::Shape(format!("input length {input_len} is too short for two pooling stages")));
    }
    let branches = (0..k)
        .map(|b| cnn_branch(&mut Rng::new(seed, &format!("init/branch{b}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let head = vec![
        Layer::Dense(Dense::new(32 * k * out_len, HIDDEN_UNITS, &mut Rng::new(seed, "init/fc1"))),
        Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE)),
        Layer::Dropout(Dropout::new(DROPOUT_RATE, Rng::new(seed, "dropout"))),
        Layer::Dense(Dense::zeros(HIDDEN_UNITS, n_classes)),
    ];
    Ok(Network::new(branches, head))
}

/// Hidden widths `(p, p/2, p/4)` of the PCA baseline.
pub fn pca_nn_widths(p: usize) -> [usize; 3] {
    [p, (p / 2).max(1), (p / 4).max(1)]
}

pub fn build_pca_nn(p: usize, n_classes: usize, seed: u64) -> Network {
    let mut layers = Vec::new();
    let mut n_in = p;
    for (i, w) in pca_nn_widths(p).into_iter().enumerate() {
        layers.push(Layer::Dense(Dense::new(n_in, w, &mut Rng::new(seed, &format!("init/fc{i}")))));
        layers.push(Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE)));
        n_in = w;
    }
    layers.push(Layer::Dense(Dense::zeros(n_in, n_classes)));
    Network::sequential(layers)
}

/// Code sizes `(d/2, d/4)` of the stacked autoencoder.
pub fn ae_widths(d: usize) -> [usize; 2] {
    [(d / 2).max(1), (d / 4).max(1)]
}

/// Sigmoid encoder `n_in → n_code`.
pub fn encoder(n_in: usize, n_code: usize, rng: &mut Rng) -> Vec<Layer> {
    vec![Layer::Dense(Dense::new(n_in, n_code, rng)), Layer::Sigmoid(Sigmoid::default())]
}

/// Encoder1 → encoder2 → softmax layer.
pub fn build_stacked_ae(d: usize, n_classes: usize, seed: u64) -> Network {
    let [h1, h2] = ae_widths(d);
    let mut layers = encoder(d, h1, &mut Rng::new(seed, "init/enc1"));
    layers.extend(encoder(h1, h2, &mut Rng::new(seed, "init/enc2")));
    layers.push(Layer::Dense(Dense::zeros(h2, n_classes)));
    Network::sequential(layers)
}

/// Self-describing network shape, stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    Cnn {
        branches: usize,
        input_len: usize,
        n_classes: usize,
    },
    PcaNn {
        components: usize,
        n_classes: usize,
    },
    AeNn {
        input_dim: usize,
        n_classes: usize,
    },
}

impl Architecture {
    pub fn build(&self, seed: u64) -> Result<Network, NetError> {
        match *self {
            Architecture::Cnn {
                branches,
                input_len,
                n_classes,
            } => build_multibranch(branches, input_len, n_classes, seed),
            Architecture::PcaNn { components, n_classes } => Ok(build_pca_nn(components, n_classes, seed)),
            Architecture::AeNn { input_dim, n_classes } => Ok(build_stacked_ae(input_dim, n_classes, seed)),
        }
    }

    pub fn n_classes(&self) -> usize {
        match *self {
            Architecture::Cnn { n_classes, .. }
            | Architecture::PcaNn { n_classes, .. }
            | Architecture::AeNn { n_classes, .. } => n_classes,
        }
    }

    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("architecture serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(k: usize, n: usize, l: usize) -> Vec<Tensor> {
        let mut rng = Rng::new(3, "x");
        (0..k)
            .map(|_| Tensor::from_vec(n, 1, l, (0..n * l).map(|_| rng.gaussian()).collect()).unwrap())
            .collect()
    }

    #[test]
    fn single_branch_concat_is_identity() {
        let mut net = build_multibranch(1, 16, 2, 0).unwrap();
        let x = inputs(1, 2, 16);
        let branch = net.forward_branches(&x, Mode::Train).unwrap();
        let concat = net.forward_concat(&x, Mode::Train).unwrap();
        assert_eq!(concat, branch[0]);
        assert_eq!(concat.shape(), (2, 32, 4));
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = build_multibranch(3, 32, 4, 11).unwrap();
        let b = build_multibranch(3, 32, 4, 11).unwrap();
        let c = build_multibranch(3, 32, 4, 12).unwrap();
        assert_eq!(a.blobs(), b.blobs());
        assert_ne!(a.blobs(), c.blobs());
    }

    #[test]
    fn branches_are_independent() {
        let net = build_multibranch(2, 32, 2, 5).unwrap();
        let w = |b: usize| match &net.branches[b][0] {
            Layer::Conv1d(c) => c.weight.value.clone(),
            _ => unreachable!(),
        };
        assert_ne!(w(0), w(1));
    }

    #[test]
    fn widths() {
        assert_eq!(pca_nn_widths(50), [50, 25, 12]);
        assert_eq!(ae_widths(800), [400, 200]);
    }

    #[test]
    fn blob_round_trip() {
        let mut a = build_multibranch(2, 16, 3, 1).unwrap();
        a.forward(&inputs(2, 4, 16), Mode::Train).unwrap();
        let mut b = build_multibranch(2, 16, 3, 99).unwrap();
        b.load_blobs(a.blobs()).unwrap();
        assert_eq!(a.blobs(), b.blobs());
        let x = inputs(2, 3, 16);
        assert_eq!(a.forward(&x, Mode::Eval).unwrap(), b.forward(&x, Mode::Eval).unwrap());
    }

    #[test]
    fn architecture_descriptor_round_trips() {
        let a = Architecture::Cnn {
            branches: 3,
            input_len: 9,
            n_classes: 4,
        };
        let back: Architecture = serde_json::from_str(&a.descriptor()).unwrap();
        assert_eq!(a, back);
    }
}
