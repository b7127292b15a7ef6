use serde::Serialize;

use super::layers::{Dense, Layer};
use super::network::{ae_widths, build_pca_nn, encoder, Network};
use super::train::{predict_outputs, train, Targets, TrainConfig, TrainReport};
use super::{NetError, Tensor};
use crate::numerics::{pca_fit, Pca, Rng};

pub const PCA_COMPONENTS: usize = 50;

/// Fits the PCA on the training rows, then trains the `(p, p/2, p/4)` net
/// on the projections. `p = min(d, 50, n − 1)`.
pub fn train_pca_nn(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Pca, Network, TrainReport), NetError> {
    let d = rows.first().map_or(0, Vec::len);
    let p = d.min(PCA_COMPONENTS).min(rows.len().saturating_sub(1)).max(1);
    if p < d.min(PCA_COMPONENTS) {
        log::warn!("PCA keeps {p} components (limited by the sample count)");
    }
    let pca = pca_fit(rows, p).map_err(|e| NetError::Config(format!("PCA: {e}")))?;
    let x = project(&pca, rows)?;
    let mut net = build_pca_nn(p, n_classes, seed);
    let report = train(&mut net, &[x], Targets::Classes { labels, n_classes }, cfg, seed)?;
    Ok((pca, net, report))
}

pub fn project(pca: &Pca, rows: &[Vec<f64>]) -> Result<Tensor, NetError> {
    let projected: Vec<Vec<f64>> = rows.iter().map(|r| pca.project(r)).collect();
    Tensor::from_rows(projected.iter().map(Vec::as_slice))
}

/// Sigmoid encoder with a linear decoder, trained on reconstruction MSE.
pub fn train_autoencoder(
    x: &Tensor,
    code: usize,
    cfg: &TrainConfig,
    seed: u64,
    label: &str,
) -> Result<(Network, TrainReport), NetError> {
    let d = x.per_sample();
    let mut layers = encoder(d, code, &mut Rng::new(seed, &format!("init/{label}/enc")));
    layers.push(Layer::Dense(Dense::new(code, d, &mut Rng::new(seed, &format!("init/{label}/dec")))));
    let mut net = Network::sequential(layers);
    let flat = Tensor::from_vec(x.n, d, 1, x.data.clone())?;
    let report = train(&mut net, &[x.clone()], Targets::Values(&flat), cfg, seed)?;
    Ok((net, report))
}

fn encoder_layers(ae: &Network) -> Vec<Layer> {
    ae.head[..2].to_vec()
}

fn encode(layers: &[Layer], x: &Tensor) -> Result<Tensor, NetError> {
    let mut net = Network::sequential(layers.to_vec());
    let out = predict_outputs(&mut net, &[x.clone()], 4096)?;
    Tensor::from_vec(out.n, 1, out.per_sample(), out.data)
}

#[derive(Debug, Clone, Serialize)]
pub struct StackedAeReport {
    pub ae1: TrainReport,
    pub ae2: TrainReport,
    pub softmax: TrainReport,
    pub fine_tune: TrainReport,
}

/// Greedy layer-wise pre-training (AE1 on the inputs, AE2 on AE1's codes,
/// a softmax layer on AE2's codes), then the stacked
/// encoder1 → encoder2 → softmax net is fine-tuned end to end.
pub fn train_stacked_ae(
    x: &Tensor,
    labels: &[usize],
    n_classes: usize,
    pretrain: &TrainConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Network, StackedAeReport), NetError> {
    let [h1, h2] = ae_widths(x.per_sample());
    let (ae1, r1) = train_autoencoder(x, h1, pretrain, seed, "ae1")?;
    let enc1 = encoder_layers(&ae1);
    let codes1 = encode(&enc1, x)?;
    let (ae2, r2) = train_autoencoder(&codes1, h2, pretrain, seed, "ae2")?;
    let enc2 = encoder_layers(&ae2);
    let codes2 = encode(&enc2, &codes1)?;
    let mut head = Network::sequential(vec![Layer::Dense(Dense::zeros(h2, n_classes))]);
    let targets = Targets::Classes { labels, n_classes };
    let rs = train(&mut head, &[codes2], targets, pretrain, seed)?;
    let mut layers = enc1;
    layers.extend(enc2);
    layers.extend(head.head);
    let mut stacked = Network::sequential(layers);
    for p in stacked.params_mut() {
        p.velocity.fill(0.0);
    }
    let rf = train(&mut stacked, &[x.clone()], targets, cfg, seed)?;
    Ok((
        stacked,
        StackedAeReport {
            ae1: r1,
            ae2: r2,
            softmax: rs,
            fine_tune: rf,
        },
    ))
}
