//! Conformal factor and its multi-resolution (smoothed) variant.
//!
//! The original factor solves `ΔΦ = K^T − K` on the base mesh, where `K`
//! is the integrated Gaussian curvature and `K^T` its area-proportional
//! redistribution. The smoothed factors solve `ΔΦ_i = K^T_i − K^T` on each
//! smoothed mesh `M_i`, with `K^T_i` the target curvature of `M_i` and `K^T`
//! the target curvature of the base mesh, so they only see changes caused by
//! the smoothing and not the tessellation.
//!
//! `Δ` is the cotangent Laplace–Beltrami operator without area weights,
//! `(ΔΦ)_i = Σ_j w_ij (Φ_j − Φ_i)`, `w_ij = ½(cot α_ij + cot β_ij)`. Its
//! nullspace is per-component constants; every factor is zero-mean on each
//! connected component.

use serde::{Deserialize, Serialize};

use super::curvature::{angle_deficits, target_curvature};
use super::FeatureError;
use crate::mesh::Mesh;
use crate::numerics::{solve_singular_spd_grouped, SparseSymmetric};
use crate::smoothing::SmoothedMeshSequence;

const COT_CLAMP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    /// Iteration cap as a multiple of the vertex count.
    pub max_iter_factor: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            max_iter_factor: 10,
        }
    }
}

/// Per-vertex conformal factors of a mesh and its smoothed levels.
#[derive(Debug, Clone)]
pub struct ConformalFactorField {
    pub original: Vec<f64>,
    pub smoothed: Vec<Vec<f64>>,
}

impl ConformalFactorField {
    pub fn compute(seq: &SmoothedMeshSequence, settings: SolverSettings) -> Result<Self, FeatureError> {
        Ok(ConformalFactorField {
            original: conformal_factor_with(&seq.base, settings)?,
            smoothed: smoothed_conformal_factor_with(seq, settings)?,
        })
    }
}

/// The positive semidefinite matrix `−Δ` (cotangent weights, clamped).
pub fn cotangent_laplacian(mesh: &Mesh) -> Result<SparseSymmetric, FeatureError> {
    let v = mesh.vertices();
    let mut triplets = Vec::with_capacity(mesh.face_count() * 9);
    for tri in mesh.faces() {
        for k in 0..3 {
            // Angle at tri[k] is opposite edge (tri[k+1], tri[k+2]).
            let (o, i, j) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (e1, e2) = (v[i] - v[o], v[j] - v[o]);
            let cot = (e1.dot(&e2) / e1.cross(&e2).norm()).clamp(-COT_CLAMP, COT_CLAMP);
            let w = 0.5 * cot;
            triplets.push((i, j, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    Ok(SparseSymmetric::from_triplets(mesh.vertex_count(), triplets)?)
}

/// Solves `Δ Φ = rhs` with the per-component zero-mean gauge.
fn solve_laplace(mesh: &Mesh, rhs: &[f64], settings: SolverSettings) -> Result<Vec<f64>, FeatureError> {
    let l = cotangent_laplacian(mesh)?;
    let (groups, count) = mesh.vertex_components();
    let negated: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let max_iter = (settings.max_iter_factor * mesh.vertex_count()).max(100);
    Ok(solve_singular_spd_grouped(&l, &negated, &groups, count, settings.tol, max_iter)?)
}

pub fn conformal_factor(mesh: &Mesh) -> Result<Vec<f64>, FeatureError> {
    conformal_factor_with(mesh, SolverSettings::default())
}

pub fn conformal_factor_with(mesh: &Mesh, settings: SolverSettings) -> Result<Vec<f64>, FeatureError> {
    let k_orig = angle_deficits(mesh);
    let k_target = target_curvature(mesh, &k_orig)?;
    let rhs: Vec<f64> = k_target.iter().zip(&k_orig).map(|(t, k)| t - k).collect();
    solve_laplace(mesh, &rhs, settings)
}

pub fn smoothed_conformal_factor(seq: &SmoothedMeshSequence) -> Result<Vec<Vec<f64>>, FeatureError> {
    smoothed_conformal_factor_with(seq, SolverSettings::default())
}

pub fn smoothed_conformal_factor_with(
    seq: &SmoothedMeshSequence,
    settings: SolverSettings,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    let base_target = target_curvature(&seq.base, &angle_deficits(&seq.base))?;
    seq.levels
        .iter()
        .map(|level| {
            let level_target = target_curvature(level, &angle_deficits(level))?;
            let rhs: Vec<f64> = level_target.iter().zip(&base_target).map(|(s, t)| s - t).collect();
            solve_laplace(level, &rhs, settings)
        })
        .collect()
}

/// Arithmetic mean of the three vertex values of each face.
pub fn vertex_to_face(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    mesh.faces()
        .iter()
        .map(|&[a, b, c]| (values[a] + values[b] + values[c]) / 3.0)
        .collect()
}
