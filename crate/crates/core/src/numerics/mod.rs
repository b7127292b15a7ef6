//! Numerical kernel: sparse symmetric solves, PCA, and seeded random streams.

mod pca;
mod rng;
mod sparse;

use thiserror::Error;

pub use pca::{pca_fit, Pca};
pub use rng::{Rng, RngState};
pub use sparse::{solve_singular_spd, solve_singular_spd_grouped, SparseSymmetric};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),
    #[error("{0}")]
    InvalidArgument(String),
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}
