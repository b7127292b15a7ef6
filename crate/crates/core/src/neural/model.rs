use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::baselines::{project, train_pca_nn, train_stacked_ae};
use super::network::{build_multibranch, Architecture, Network};
use super::train::{predict_probabilities, train, Targets, TrainConfig, TrainReport};
use super::{NetError, Tensor};
use crate::binio::{FormatError, Reader, Writer};
use crate::features::{multiscale, FeatureMatrix, Normalization};
use crate::mesh::DualGraph;
use crate::numerics::Pca;

/// Which classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelKind {
    Cnn { branches: usize },
    PcaNn,
    AeNn,
}

impl Default for ModelKind {
    fn default() -> Self {
        ModelKind::Cnn { branches: 3 }
    }
}

/// Raw features, dual graph and ground truth of one training mesh.
#[derive(Debug, Clone, Copy)]
pub struct LabeledFeatures<'a> {
    pub features: &'a FeatureMatrix,
    pub graph: &'a DualGraph,
    pub labels: &'a [usize],
}

/// A trained network plus everything needed to turn raw per-face features
/// of an unseen mesh into network inputs.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub architecture: Architecture,
    pub seed: u64,
    pub channels: Vec<String>,
    pub normalization: Normalization,
    pub pca: Option<Pca>,
    pub net: Network,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    /// Loss curve of the final (for the autoencoder: fine-tuning) stage.
    pub train: TrainReport,
    pub pretraining: Vec<TrainReport>,
}

fn scales(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Cnn { branches } => branches,
        _ => 1,
    }
}

fn branch_inputs(
    normalized: &FeatureMatrix,
    graph: &DualGraph,
    k: usize,
) -> Result<Vec<Tensor>, NetError> {
    let ms = multiscale(normalized, graph, k)?;
    ms.scales.iter().map(|s| Tensor::from_rows(s.rows())).collect()
}

fn stack(parts: Vec<Vec<Tensor>>) -> Result<Vec<Tensor>, NetError> {
    let k = parts.first().map_or(0, Vec::len);
    (0..k)
        .map(|b| {
            let ts: Vec<&Tensor> = parts.iter().map(|p| &p[b]).collect();
            let (c, l) = (ts[0].c, ts[0].l);
            let n = ts.iter().map(|t| t.n).sum();
            Tensor::from_vec(n, c, l, ts.iter().flat_map(|t| t.data.iter().copied()).collect())
        })
        .collect()
}

impl Classifier {
    /// Fits normalization statistics on the training meshes only, then
    /// trains the requested model.
    pub fn fit(
        kind: ModelKind,
        data: &[LabeledFeatures],
        n_classes: usize,
        cfg: &TrainConfig,
        pretrain: &TrainConfig,
        seed: u64,
    ) -> Result<(Classifier, FitReport), NetError> {
        if n_classes < 2 {
            return Err(NetError::Config("at least two classes are required".into()));
        }
        let first = data.first().ok_or(NetError::Config("no training meshes".into()))?;
        let channels = first.features.channels().to_vec();
        for d in data {
            if d.labels.len() != d.features.faces() {
                return Err(NetError::Shape(format!(
                    "{} labels for {} faces",
                    d.labels.len(),
                    d.features.faces()
                )));
            }
        }
        let normalization = Normalization::fit(data.iter().map(|d| d.features))?;
        let normalized = data
            .iter()
            .map(|d| normalization.apply(d.features))
            .collect::<Result<Vec<_>, _>>()?;
        let labels: Vec<usize> = data.iter().flat_map(|d| d.labels.iter().copied()).collect();
        let targets = Targets::Classes {
            labels: &labels,
            n_classes,
        };
        let d = channels.len();
        let (architecture, pca, net, report) = match kind {
            ModelKind::Cnn { branches } => {
                let inputs = stack(
                    normalized
                        .iter()
                        .zip(data)
                        .map(|(n, d)| branch_inputs(n, d.graph, branches))
                        .collect::<Result<_, _>>()?,
                )?;
                let mut net = build_multibranch(branches, d, n_classes, seed)?;
                let r = train(&mut net, &inputs, targets, cfg, seed)?;
                let arch = Architecture::Cnn {
                    branches,
                    input_len: d,
                    n_classes,
                };
                (arch, None, net, FitReport { train: r, pretraining: vec![] })
            }
            ModelKind::PcaNn => {
                let rows: Vec<Vec<f64>> = normalized.iter().flat_map(|m| m.rows().map(<[f64]>::to_vec)).collect();
                let (pca, net, r) = train_pca_nn(&rows, &labels, n_classes, cfg, seed)?;
                let arch = Architecture::PcaNn {
                    components: pca.components(),
                    n_classes,
                };
                (arch, Some(pca), net, FitReport { train: r, pretraining: vec![] })
            }
            ModelKind::AeNn => {
                let x = Tensor::from_rows(normalized.iter().flat_map(|m| m.rows()))?;
                let (net, r) = train_stacked_ae(&x, &labels, n_classes, pretrain, cfg, seed)?;
                let arch = Architecture::AeNn { input_dim: d, n_classes };
                let report = FitReport {
                    train: r.fine_tune,
                    pretraining: vec![r.ae1, r.ae2, r.softmax],
                };
                (arch, None, net, report)
            }
        };
        debug_assert_eq!(scales(kind), net.branch_count());
        Ok((
            Classifier {
                architecture,
                seed,
                channels,
                normalization,
                pca,
                net,
            },
            report,
        ))
    }

    pub fn n_classes(&self) -> usize {
        self.architecture.n_classes()
    }

    /// Network inputs for one mesh's raw features.
    pub fn inputs(&self, raw: &FeatureMatrix, graph: &DualGraph) -> Result<Vec<Tensor>, NetError> {
        if raw.channels() != self.channels.as_slice() {
            return Err(NetError::Shape(format!(
                "mesh features have channels {:?}, the model was trained on {:?}",
                raw.channels(),
                self.channels
            )));
        }
        let normalized = self.normalization.apply(raw)?;
        match (&self.architecture, &self.pca) {
            (Architecture::Cnn { branches, .. }, _) => branch_inputs(&normalized, graph, *branches),
            (Architecture::PcaNn { .. }, Some(pca)) => {
                let rows: Vec<Vec<f64>> = normalized.rows().map(<[f64]>::to_vec).collect();
                Ok(vec![project(pca, &rows)?])
            }
            (Architecture::PcaNn { .. }, None) => Err(NetError::Checkpoint("PCA model without a basis".into())),
            (Architecture::AeNn { .. }, _) => Ok(vec![Tensor::from_rows(normalized.rows())?]),
        }
    }

    /// Per-face class probabilities.
    pub fn predict(&mut self, raw: &FeatureMatrix, graph: &DualGraph) -> Result<Vec<Vec<f64>>, NetError> {
        let inputs = self.inputs(raw, graph)?;
        predict_probabilities(&mut self.net, &inputs)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), FormatError> {
        let mut w = Writer::new(out);
        w.header(MODEL_MAGIC, MODEL_VERSION)?;
        w.str(&self.architecture.descriptor())?;
        w.u64(self.seed)?;
        w.u32(self.channels.len() as u32)?;
        for c in &self.channels {
            w.str(c)?;
        }
        w.f64s(&self.normalization.mean)?;
        w.f64s(&self.normalization.std)?;
        match &self.pca {
            None => w.u32(0)?,
            Some(p) => {
                w.u32(p.components() as u32)?;
                w.f64s(&p.mean)?;
                for b in &p.basis {
                    w.f64s(b)?;
                }
                w.f64s(&p.variances)?;
            }
        }
        let blobs = self.net.blobs();
        w.u32(blobs.len() as u32)?;
        for b in &blobs {
            w.u64(b.len() as u64)?;
            w.f64s(b)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self, FormatError> {
        let mut r = Reader::new(input);
        r.header(MODEL_MAGIC, "model checkpoint", MODEL_VERSION)?;
        let descriptor = r.str("architecture")?;
        let architecture: Architecture = serde_json::from_str(&descriptor)
            .map_err(|e| FormatError::Invalid(format!("architecture descriptor {descriptor:?}: {e}")))?;
        let seed = r.u64("seed")?;
        let d = r.u32("channel count")? as usize;
        let channels = (0..d).map(|_| r.str("channel name")).collect::<Result<Vec<_>, _>>()?;
        let normalization = Normalization {
            channels: channels.clone(),
            mean: r.f64s(d, "normalization mean")?,
            std: r.f64s(d, "normalization std")?,
        };
        let k = r.u32("PCA components")? as usize;
        let pca = if k == 0 {
            None
        } else {
            let mean = r.f64s(d, "PCA mean")?;
            let basis = (0..k).map(|_| r.f64s(d, "PCA basis")).collect::<Result<Vec<_>, _>>()?;
            let variances = r.f64s(k, "PCA variances")?;
            Some(Pca { mean, basis, variances })
        };
        let count = r.u32("blob count")? as usize;
        let mut blobs = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u64("blob length")? as usize;
            blobs.push(r.f64s(len, "parameters")?);
        }
        r.finish()?;
        let invalid = |e: NetError| FormatError::Invalid(e.to_string());
        let mut net = architecture.build(seed).map_err(invalid)?;
        net.load_blobs(blobs).map_err(invalid)?;
        Ok(Classifier {
            architecture,
            seed,
            channels,
            normalization,
            pca,
            net,
        })
    }
}

const MODEL_MAGIC: &[u8; 8] = b"MSEGMODL";
pub const MODEL_VERSION: u32 = 1;
