//! Small from-scratch 1D networks: the multi-branch CNN and the PCA and
//! stacked-autoencoder baselines, with SGD training and gradient checks.
//!
//! Each face's feature vector is read as a single-channel 1D signal whose
//! length is the number of feature channels; branch `k` of the CNN sees the
//! vector averaged over the face's `(k − 1)`-ring.

pub mod baselines;
pub mod gradcheck;
pub mod layers;
mod model;
pub mod network;
mod tensor;
pub mod train;

use thiserror::Error;

pub use model::{Classifier, FitReport, LabeledFeatures, ModelKind, MODEL_VERSION};
pub use network::{build_multibranch, Architecture, Network};
pub use tensor::Tensor;
pub use train::{predict_probabilities, train, Targets, TrainConfig, TrainReport};

use crate::features::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}: backward called before forward")]
    NoForwardPass(&'static str),
    #[error("batchnorm in evaluation mode before any training batch")]
    BatchNormUnset,
    #[error("batchnorm training needs a batch of at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("non-finite loss at epoch {}, batch {batch}", epoch + 1)]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
