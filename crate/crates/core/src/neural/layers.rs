//! The fixed layer vocabulary. Every layer caches what its backward pass
//! needs during `forward`; parameter gradients accumulate into
//! [`Param::grad`] until cleared.

use super::{Mode, NetError, Tensor};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Param {
            value,
            grad: vec![0.0; n],
            velocity: vec![0.0; n],
        }
    }

    /// Uniform in ±√(6 / fan_in).
    pub fn he_uniform(len: usize, fan_in: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        Param::new((0..len).map(|_| rng.uniform_range(-bound, bound)).collect())
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

fn missing(layer: &'static str) -> NetError {
    NetError::NoForwardPass(layer)
}

/// Same-padded 1D convolution with an odd kernel.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    /// `[c_out][c_in][kernel]`.
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, rng: &mut Rng) -> Result<Self, NetError> {
        if kernel % 2 == 0 {
            return Err(NetError::Shape(format!("kernel size {kernel} must be odd")));
        }
        Ok(Conv1d {
            c_in,
            c_out,
            kernel,
            weight: Param::he_uniform(c_out * c_in * kernel, c_in * kernel, rng),
            bias: Param::new(vec![0.0; c_out]),
            input: None,
        })
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NetError> {
        if x.c != self.c_in {
            return Err(NetError::Shape(format!(
                "conv1d expects {} input channels, got {}",
                self.c_in, x.c
            )));
        }
        let (n, l, k, p) = (x.n, x.l, self.kernel, self.kernel / 2);
        let mut y = Tensor::zeros(n, self.c_out, l);
        for i in 0..n {
            for o in 0..self.c_out {
                let out = &mut y.data[(i * self.c_out + o) * l..][..l];
                out.fill(self.bias.value[o]);
                for c in 0..self.c_in {
                    let xin = &x.data[(i * self.c_in + c) * l..][..l];
                    let w = &self.weight.value[(o * self.c_in + c) * k..][..k];
                    for (j, &wj) in w.iter().enumerate() {
                        // out[t] += w[j] · x[t + j − p]
                        let lo = p.saturating_sub(j);
                        let hi = (l + p).saturating_sub(j).min(l);
                        for t in lo..hi {
                            out[t] += wj * xin[t + j - p];
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let x = self.input.as_ref().ok_or(missing("conv1d"))?;
        let (n, l, k, p) = (x.n, x.l, self.kernel, self.kernel / 2);
        let mut gx = Tensor::zeros(n, self.c_in, l);
        for i in 0..n {
            for o in 0..self.c_out {
                let go = &g.data[(i * self.c_out + o) * l..][..l];
                self.bias.grad[o] += go.iter().sum::<f64>();
                for c in 0..self.c_in {
                    let xin = &x.data[(i * self.c_in + c) * l..][..l];
                    let gxin = &mut gx.data[(i * self.c_in + c) * l..][..l];
                    let base = (o * self.c_in + c) * k;
                    for j in 0..k {
                        let wj = self.weight.value[base + j];
                        let lo = p.saturating_sub(j);
                        let hi = (l + p).saturating_sub(j).min(l);
                        let mut gw = 0.0;
                        for t in lo..hi {
                            gw += go[t] * xin[t + j - p];
                            gxin[t + j - p] += go[t] * wj;
                        }
                        self.weight.grad[base + j] += gw;
                    }
                }
            }
        }
        Ok(gx)
    }
}

/// Per-channel batch normalization over samples and positions.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Whether a training batch has set the running statistics.
    pub initialized: bool,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    training: bool,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            channels,
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            initialized: false,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NetError> {
        if x.c != self.channels {
            return Err(NetError::Shape(format!(
                "batchnorm expects {} channels, got {}",
                self.channels, x.c
            )));
        }
        let (n, c, l) = x.shape();
        let count = (n * l) as f64;
        let training = mode == Mode::Train;
        let (mean, var) = if training {
            if n < 2 {
                return Err(NetError::BatchTooSmall(n));
            }
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let vals = (0..n).flat_map(|i| &x.data[(i * c + ch) * l..][..l]);
                let m = vals.clone().sum::<f64>() / count;
                mean[ch] = m;
                var[ch] = vals.map(|v| (v - m) * (v - m)).sum::<f64>() / count;
            }
            let unbiased = count / (count - 1.0);
            for ch in 0..c {
                if self.initialized {
                    let m = self.momentum;
                    self.running_mean[ch] = m * self.running_mean[ch] + (1.0 - m) * mean[ch];
                    self.running_var[ch] = m * self.running_var[ch] + (1.0 - m) * var[ch] * unbiased;
                } else {
                    self.running_mean[ch] = mean[ch];
                    self.running_var[ch] = var[ch] * unbiased;
                }
            }
            self.initialized = true;
            (mean, var)
        } else {
            if !self.initialized {
                return Err(NetError::BatchNormUnset);
            }
            (self.running_mean.clone(), self.running_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = Tensor::zeros(n, c, l);
        let mut y = Tensor::zeros(n, c, l);
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * l;
                for t in 0..l {
                    let h = (x.data[off + t] - mean[ch]) * inv_std[ch];
                    xhat.data[off + t] = h;
                    y.data[off + t] = self.gamma.value[ch] * h + self.beta.value[ch];
                }
            }
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            training,
        });
        Ok(y)
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let cache = self.cache.as_ref().ok_or(missing("batchnorm"))?;
        let (n, c, l) = g.shape();
        let count = (n * l) as f64;
        let mut gx = Tensor::zeros(n, c, l);
        for ch in 0..c {
            let (mut sum_g, mut sum_gh) = (0.0, 0.0);
            for i in 0..n {
                let off = (i * c + ch) * l;
                for t in 0..l {
                    sum_g += g.data[off + t];
                    sum_gh += g.data[off + t] * cache.xhat.data[off + t];
                }
            }
            self.beta.grad[ch] += sum_g;
            self.gamma.grad[ch] += sum_gh;
            let scale = self.gamma.value[ch] * cache.inv_std[ch];
            for i in 0..n {
                let off = (i * c + ch) * l;
                for t in 0..l {
                    gx.data[off + t] = if cache.training {
                        scale * (g.data[off + t] - sum_g / count - cache.xhat.data[off + t] * sum_gh / count)
                    } else {
                        scale * g.data[off + t]
                    };
                }
            }
        }
        Ok(gx)
    }
}

#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    input: Option<Tensor>,
}

pub const LEAKY_SLOPE: f64 = 0.2;

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope, input: None }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        for v in &mut y.data {
            if *v <= 0.0 {
                *v *= self.slope;
            }
        }
        self.input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let x = self.input.as_ref().ok_or(missing("leaky relu"))?;
        let mut gx = g.clone();
        for (gv, &xv) in gx.data.iter_mut().zip(&x.data) {
            if xv <= 0.0 {
                *gv *= self.slope;
            }
        }
        Ok(gx)
    }

    fn pattern(&self, out: &mut Vec<bool>) {
        if let Some(x) = &self.input {
            out.extend(x.data.iter().map(|&v| v > 0.0));
        }
    }
}

/// Non-overlapping max pooling with window 2; an odd trailing element is
/// dropped.
#[derive(Debug, Clone, Default)]
pub struct MaxPool {
    cache: Option<(Vec<usize>, (usize, usize, usize))>,
}

impl MaxPool {
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let (n, c, l) = x.shape();
        let lo = l / 2;
        let mut y = Tensor::zeros(n, c, lo);
        let mut arg = Vec::with_capacity(n * c * lo);
        for row in 0..n * c {
            for t in 0..lo {
                let (a, b) = (row * l + 2 * t, row * l + 2 * t + 1);
                let pick = if x.data[b] > x.data[a] { b } else { a };
                y.data[row * lo + t] = x.data[pick];
                arg.push(pick);
            }
        }
        self.cache = Some((arg, (n, c, l)));
        y
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let (arg, (n, c, l)) = self.cache.as_ref().ok_or(missing("maxpool"))?;
        let mut gx = Tensor::zeros(*n, *c, *l);
        for (k, &src) in arg.iter().enumerate() {
            gx.data[src] += g.data[k];
        }
        Ok(gx)
    }

    fn pattern(&self, out: &mut Vec<bool>) {
        if let Some((arg, _)) = &self.cache {
            out.extend(arg.iter().map(|&a| a % 2 == 1));
        }
    }
}

/// Fully connected layer over the flattened (channel-major) sample.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_out][n_in]`.
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, rng: &mut Rng) -> Self {
        Dense {
            n_in,
            n_out,
            weight: Param::he_uniform(n_in * n_out, n_in, rng),
            bias: Param::new(vec![0.0; n_out]),
            input: None,
        }
    }

    /// All-zero weights and biases (used for classifier outputs, so the
    /// initial prediction is uniform).
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weight: Param::new(vec![0.0; n_in * n_out]),
            bias: Param::new(vec![0.0; n_out]),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NetError> {
        if x.per_sample() != self.n_in {
            return Err(NetError::Shape(format!(
                "dense layer expects {} inputs, got {}×{}",
                self.n_in, x.c, x.l
            )));
        }
        let mut y = Tensor::zeros(x.n, self.n_out, 1);
        for i in 0..x.n {
            let xin = x.sample(i);
            for o in 0..self.n_out {
                let w = &self.weight.value[o * self.n_in..][..self.n_in];
                y.data[i * self.n_out + o] =
                    self.bias.value[o] + w.iter().zip(xin).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let x = self.input.as_ref().ok_or(missing("dense"))?;
        let mut gx = Tensor::zeros(x.n, x.c, x.l);
        for i in 0..x.n {
            let xin = x.sample(i);
            let gxi = &mut gx.data[i * self.n_in..][..self.n_in];
            for o in 0..self.n_out {
                let go = g.data[i * self.n_out + o];
                if go == 0.0 {
                    continue;
                }
                self.bias.grad[o] += go;
                let w = &self.weight.value[o * self.n_in..][..self.n_in];
                let gw = &mut self.weight.grad[o * self.n_in..][..self.n_in];
                for k in 0..self.n_in {
                    gw[k] += go * xin[k];
                    gxi[k] += go * w[k];
                }
            }
        }
        Ok(gx)
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 − rate)` at training
/// time so evaluation is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    rng: Rng,
    mask: Option<Vec<f64>>,
    /// Reuse the previous mask instead of drawing a new one.
    pub frozen: bool,
    training: bool,
}

impl Dropout {
    pub fn new(rate: f64, rng: Rng) -> Self {
        Dropout {
            rate,
            rng,
            mask: None,
            frozen: false,
            training: false,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Tensor {
        self.training = mode == Mode::Train;
        if !self.training || self.rate == 0.0 {
            return x.clone();
        }
        let reuse = self.frozen && self.mask.as_ref().is_some_and(|m| m.len() == x.data.len());
        if !reuse {
            let keep = 1.0 / (1.0 - self.rate);
            self.mask = Some(
                (0..x.data.len())
                    .map(|_| if self.rng.uniform() < self.rate { 0.0 } else { keep })
                    .collect(),
            );
        }
        let mask = self.mask.as_ref().unwrap();
        let mut y = x.clone();
        for (v, m) in y.data.iter_mut().zip(mask) {
            *v *= m;
        }
        y
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        if !self.training || self.rate == 0.0 {
            return Ok(g.clone());
        }
        let mask = self.mask.as_ref().ok_or(missing("dropout"))?;
        let mut gx = g.clone();
        for (v, m) in gx.data.iter_mut().zip(mask) {
            *v *= m;
        }
        Ok(gx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    output: Option<Tensor>,
}

impl Sigmoid {
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        for v in &mut y.data {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.output = Some(y.clone());
        y
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        let y = self.output.as_ref().ok_or(missing("sigmoid"))?;
        let mut gx = g.clone();
        for (v, &s) in gx.data.iter_mut().zip(&y.data) {
            *v *= s * (1.0 - s);
        }
        Ok(gx)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv1d(Conv1d),
    BatchNorm(BatchNorm),
    LeakyRelu(LeakyRelu),
    MaxPool(MaxPool),
    Dense(Dense),
    Dropout(Dropout),
    Sigmoid(Sigmoid),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::LeakyRelu(_) => "leaky_relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Dense(_) => "dense",
            Layer::Dropout(_) => "dropout",
            Layer::Sigmoid(_) => "sigmoid",
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NetError> {
        match self {
            Layer::Conv1d(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::LeakyRelu(l) => Ok(l.forward(x)),
            Layer::MaxPool(l) => Ok(l.forward(x)),
            Layer::Dense(l) => l.forward(x),
            Layer::Dropout(l) => Ok(l.forward(x, mode)),
            Layer::Sigmoid(l) => Ok(l.forward(x)),
        }
    }

    pub fn backward(&mut self, g: &Tensor) -> Result<Tensor, NetError> {
        match self {
            Layer::Conv1d(l) => l.backward(g),
            Layer::BatchNorm(l) => l.backward(g),
            Layer::LeakyRelu(l) => l.backward(g),
            Layer::MaxPool(l) => l.backward(g),
            Layer::Dense(l) => l.backward(g),
            Layer::Dropout(l) => l.backward(g),
            Layer::Sigmoid(l) => l.backward(g),
        }
    }

    /// Trainable parameters, in declaration order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv1d(l) => vec![&l.weight, &l.bias],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }

    /// Parameters plus non-trainable state (batchnorm running statistics),
    /// as serialized in checkpoints.
    pub fn blobs(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.params().iter().map(|p| p.value.clone()).collect();
        if let Layer::BatchNorm(bn) = self {
            out.push(bn.running_mean.clone());
            out.push(bn.running_var.clone());
            out.push(vec![if bn.initialized { 1.0 } else { 0.0 }]);
        }
        out
    }

    pub fn load_blobs(&mut self, blobs: &mut impl Iterator<Item = Vec<f64>>) -> Result<(), NetError> {
        let name = self.name();
        let mut next = |expected: usize| -> Result<Vec<f64>, NetError> {
            let b = blobs.next().ok_or(NetError::Checkpoint(format!("missing parameters for {name}")))?;
            if b.len() != expected {
                return Err(NetError::Checkpoint(format!(
                    "{name} parameter has {} values, architecture needs {expected}",
                    b.len()
                )));
            }
            Ok(b)
        };
        match self {
            Layer::Conv1d(l) => {
                l.weight = Param::new(next(l.weight.len())?);
                l.bias = Param::new(next(l.bias.len())?);
            }
            Layer::Dense(l) => {
                l.weight = Param::new(next(l.weight.len())?);
                l.bias = Param::new(next(l.bias.len())?);
            }
            Layer::BatchNorm(l) => {
                l.gamma = Param::new(next(l.channels)?);
                l.beta = Param::new(next(l.channels)?);
                l.running_mean = next(l.channels)?;
                l.running_var = next(l.channels)?;
                l.initialized = next(1)?[0] != 0.0;
            }
            _ => {}
        }
        Ok(())
    }

    /// Which side of each kink the last forward pass landed on.
    pub fn pattern(&self, out: &mut Vec<bool>) {
        match self {
            Layer::LeakyRelu(l) => l.pattern(out),
            Layer::MaxPool(l) => l.pattern(out),
            _ => {}
        }
    }

    pub fn freeze_dropout(&mut self, frozen: bool) {
        if let Layer::Dropout(d) = self {
            d.frozen = frozen;
        }
    }
}
