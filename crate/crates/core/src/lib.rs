//! Feature-based 3D mesh segmentation.
//!
//! The pipeline runs in four stages:
//!
//! 1. per-face geometric features ([`features`]): Gaussian curvature, the
//!    original and multi-resolution conformal factor, average geodesic
//!    distance and the shape diameter function;
//! 2. pre-processing: z-score normalization and multi-scale neighborhood
//!    averaging ([`features::multiscale`]);
//! 3. classification with a multi-branch 1D CNN or one of the shallow
//!    baselines ([`neural`]);
//! 4. alpha-expansion graph-cut refinement of the predicted labels
//!    ([`graphcut`]).
//!
//! [`eval`] wires the stages into cross-validated experiments scored by
//! area-weighted accuracy.

pub mod binio;
pub mod config;
pub mod error;
pub mod eval;
pub mod export;
pub mod features;
pub mod graphcut;
pub mod mesh;
pub mod neural;
pub mod numerics;
pub mod smoothing;
pub mod synthetic;

pub use error::{Error, Result};
pub use mesh::{DualGraph, Mesh};
