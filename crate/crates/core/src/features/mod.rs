//! Per-face geometric features.
//!
//! The core channel set, in order, is
//! `gc, cf0, cf1, …, cf{n}, agd, sdf` where `n` is the number of smoothing
//! iterations (5 by default, giving 9 channels). Vertex quantities (GC, CF)
//! are transferred to faces by averaging the three corners. Further
//! channels can be appended through [`FeatureRegistry::register`].

pub mod agd;
pub mod conformal;
pub mod curvature;
mod matrix;
pub mod multiscale;
pub mod sdf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use agd::average_geodesic_distance;
pub use conformal::{
    conformal_factor, cotangent_laplacian, smoothed_conformal_factor, vertex_to_face, ConformalFactorField,
    SolverSettings,
};
pub use curvature::{angle_deficits, gaussian_curvature, target_curvature, CurvatureField};
pub use matrix::{FeatureCache, FeatureMatrix, Normalization, CACHE_VERSION, STD_FLOOR};
pub use multiscale::{multiscale, MultiScaleFeatures};
pub use sdf::{shape_diameter, SdfParams, SdfResult};

use crate::binio::FormatError;
use crate::mesh::{DualGraph, Mesh, MeshError};
use crate::numerics::SolveError;
use crate::smoothing::{taubin_smooth, SmoothError, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("vertex {vertex} has zero barycentric area (isolated or degenerate one-ring)")]
    ZeroVertexArea { vertex: usize },
    #[error("mesh has zero total area")]
    ZeroTotalArea,
    #[error("non-finite value in channel {channel} at face {face}")]
    NonFinite { channel: String, face: usize },
    #[error("feature shape: {0}")]
    Shape(String),
    #[error("conformal factor solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureParams {
    pub smoothing_iterations: usize,
    pub smoothing_lambda: f64,
    pub smoothing_mu: f64,
    pub solver: SolverSettings,
    pub sdf: SdfParams,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            smoothing_iterations: DEFAULT_ITERATIONS,
            smoothing_lambda: DEFAULT_LAMBDA,
            smoothing_mu: DEFAULT_MU,
            solver: SolverSettings::default(),
            sdf: SdfParams::default(),
        }
    }
}

/// Everything an extractor may look at.
pub struct FeatureInput<'a> {
    pub mesh: &'a Mesh,
    pub graph: &'a DualGraph,
    pub params: &'a FeatureParams,
}

/// A source of one or more named per-face channels.
pub trait FeatureExtractor: Send + Sync {
    fn channels(&self, params: &FeatureParams) -> Vec<String>;
    /// One column of `face_count` values per channel, in `channels` order.
    fn extract(&self, input: &FeatureInput) -> Result<Vec<Vec<f64>>, FeatureError>;
}

struct GaussianCurvatureChannel;

impl FeatureExtractor for GaussianCurvatureChannel {
    fn channels(&self, _: &FeatureParams) -> Vec<String> {
        vec!["gc".into()]
    }

    fn extract(&self, input: &FeatureInput) -> Result<Vec<Vec<f64>>, FeatureError> {
        let k = gaussian_curvature(input.mesh)?;
        Ok(vec![vertex_to_face(input.mesh, &k)])
    }
}

struct ConformalChannels;

impl FeatureExtractor for ConformalChannels {
    fn channels(&self, params: &FeatureParams) -> Vec<String> {
        (0..=params.smoothing_iterations).map(|i| format!("cf{i}")).collect()
    }

    fn extract(&self, input: &FeatureInput) -> Result<Vec<Vec<f64>>, FeatureError> {
        let p = input.params;
        let seq = taubin_smooth(input.mesh, p.smoothing_iterations, p.smoothing_lambda, p.smoothing_mu)?;
        let field = ConformalFactorField::compute(&seq, p.solver)?;
        Ok(std::iter::once(&field.original)
            .chain(&field.smoothed)
            .map(|phi| vertex_to_face(input.mesh, phi))
            .collect())
    }
}

struct AgdChannel;

impl FeatureExtractor for AgdChannel {
    fn channels(&self, _: &FeatureParams) -> Vec<String> {
        vec!["agd".into()]
    }

    fn extract(&self, input: &FeatureInput) -> Result<Vec<Vec<f64>>, FeatureError> {
        Ok(vec![average_geodesic_distance(input.mesh, input.graph)])
    }
}

struct SdfChannel;

impl FeatureExtractor for SdfChannel {
    fn channels(&self, _: &FeatureParams) -> Vec<String> {
        vec!["sdf".into()]
    }

    fn extract(&self, input: &FeatureInput) -> Result<Vec<Vec<f64>>, FeatureError> {
        Ok(vec![shape_diameter(input.mesh, &input.params.sdf).normalized])
    }
}

/// Ordered list of extractors; the feature matrix concatenates their
/// channels in registration order.
pub struct FeatureRegistry {
    extractors: Vec<Box<dyn FeatureExtractor>>,
}

impl FeatureRegistry {
    /// `gc, cf0..cf{n}, agd, sdf`.
    pub fn core() -> Self {
        FeatureRegistry {
            extractors: vec![
                Box::new(GaussianCurvatureChannel),
                Box::new(ConformalChannels),
                Box::new(AgdChannel),
                Box::new(SdfChannel),
            ],
        }
    }

    pub fn register(&mut self, extractor: Box<dyn FeatureExtractor>) {
        self.extractors.push(extractor);
    }

    pub fn channels(&self, params: &FeatureParams) -> Vec<String> {
        self.extractors.iter().flat_map(|e| e.channels(params)).collect()
    }

    pub fn extract(&self, mesh: &Mesh, params: &FeatureParams) -> Result<FeatureMatrix, FeatureError> {
        let graph = DualGraph::build(mesh)?;
        let input = FeatureInput {
            mesh,
            graph: &graph,
            params,
        };
        let mut columns = Vec::new();
        for e in &self.extractors {
            let names = e.channels(params);
            let cols = e.extract(&input)?;
            if cols.len() != names.len() {
                return Err(FeatureError::Shape(format!(
                    "extractor declared {} channels but produced {}",
                    names.len(),
                    cols.len()
                )));
            }
            columns.extend(names.into_iter().zip(cols));
        }
        FeatureMatrix::from_columns(columns)
    }
}

/// Raw (unnormalized) core features of one mesh.
pub fn extract_features(mesh: &Mesh, params: &FeatureParams) -> Result<FeatureMatrix, FeatureError> {
    FeatureRegistry::core().extract(mesh, params)
}

/// Cache key for a mesh file: SHA-256 over its bytes, the extraction
/// parameters and the channel list.
pub fn content_hash(source: &[u8], params: &FeatureParams, channels: &[String]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((source.len() as u64).to_le_bytes());
    h.update(source);
    h.update(serde_json::to_vec(params).expect("params serialize"));
    for c in channels {
        h.update((c.len() as u64).to_le_bytes());
        h.update(c.as_bytes());
    }
    h.finalize().into()
}
