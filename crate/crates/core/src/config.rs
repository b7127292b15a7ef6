use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Protocol;
use crate::features::FeatureParams;
use crate::graphcut::RefineParams;
use crate::neural::network::MAX_BRANCHES;
use crate::neural::{ModelKind, TrainConfig};

pub const DEFAULT_REPLICATES: usize = 3;

/// Everything an experiment run depends on. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest (JSON).
    pub dataset: PathBuf,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub train: TrainConfig,
    /// Schedule of the autoencoder pre-training stages.
    #[serde(default)]
    pub pretrain: TrainConfig,
    #[serde(default)]
    pub features: FeatureParams,
    #[serde(default)]
    pub refine: RefineParams,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| e.context(format!("config {}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output = base.join(&cfg.output);
        if let Protocol::Fixed { file } = &mut cfg.protocol {
            *file = base.join(&*file);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.pretrain.validate()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be ≥ 1".into()));
        }
        if let ModelKind::Cnn { branches } = self.model {
            if !(1..=MAX_BRANCHES).contains(&branches) {
                return Err(Error::Config(format!(
                    "cnn branches must be in 1..={}, got {branches}",
                    MAX_BRANCHES
                )));
            }
        }
        if let Protocol::KFold { k } = self.protocol {
            if k < 2 {
                return Err(Error::Config(format!("k-fold needs k ≥ 2, got {k}")));
            }
        }
        let RefineParams { lambda, omega } = self.refine;
        if !(lambda >= 0.0 && lambda.is_finite() && omega >= 0.0 && omega.is_finite()) {
            return Err(Error::Config("lambda and omega must be finite and nonnegative".into()));
        }
        Ok(())
    }
}
