//! Non-shrinking λ|μ (Taubin) smoothing with the uniform umbrella Laplacian.
//!
//! Each iteration is a shrink step `v ← v + λ·Δv` followed by an inflate
//! step `v ← v + μ·Δv` with `μ < −λ < 0`, where `Δv` is the mean of the
//! one-ring minus `v`. Boundary vertices of open meshes stay pinned.

use thiserror::Error;

use crate::mesh::{Mesh, MeshError, Vec3};

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MU: f64 = -0.53;
pub const DEFAULT_ITERATIONS: usize = 5;

#[derive(Debug, Error)]
pub enum SmoothError {
    #[error("invalid smoothing parameters: {0}")]
    InvalidParameters(String),
    #[error("iteration {iteration} produced non-finite coordinates (unstable parameters?)")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// The base mesh and its progressively smoothed copies; `levels[i]` is the
/// result of `i + 1` cumulative iterations.
#[derive(Debug, Clone)]
pub struct SmoothedMeshSequence {
    pub base: Mesh,
    pub levels: Vec<Mesh>,
    pub lambda: f64,
    pub mu: f64,
}

pub fn taubin_smooth(
    mesh: &Mesh,
    iterations: usize,
    lambda: f64,
    mu: f64,
) -> Result<SmoothedMeshSequence, SmoothError> {
    if iterations == 0 {
        return Err(SmoothError::InvalidParameters("iterations must be at least 1".into()));
    }
    if !(lambda > 0.0 && lambda < -mu) {
        return Err(SmoothError::InvalidParameters(format!(
            "need 0 < lambda < -mu, got lambda = {lambda}, mu = {mu}"
        )));
    }
    let levels = run(mesh, iterations, &[lambda, mu])?;
    Ok(SmoothedMeshSequence {
        base: mesh.clone(),
        levels,
        lambda,
        mu,
    })
}

/// Plain umbrella smoothing (no inflate step). Shrinks; kept as the
/// reference the λ|μ scheme is compared against.
pub fn laplacian_smooth(mesh: &Mesh, iterations: usize, lambda: f64) -> Result<Vec<Mesh>, SmoothError> {
    run(mesh, iterations, &[lambda])
}

fn run(mesh: &Mesh, iterations: usize, factors: &[f64]) -> Result<Vec<Mesh>, SmoothError> {
    let neighbors = mesh.vertex_neighbors();
    let pinned = mesh.boundary_vertices();
    let mut positions = mesh.vertices().to_vec();
    let mut levels = Vec::with_capacity(iterations);
    for it in 0..iterations {
        for &f in factors {
            positions = umbrella_step(&positions, &neighbors, &pinned, f);
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SmoothError::NonFinite { iteration: it + 1 });
        }
        levels.push(mesh.with_positions(positions.clone())?);
    }
    Ok(levels)
}

fn umbrella_step(positions: &[Vec3], neighbors: &[Vec<usize>], pinned: &[bool], factor: f64) -> Vec<Vec3> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let ring = &neighbors[i];
            if pinned[i] || ring.is_empty() {
                return p;
            }
            let centroid = ring.iter().fold(Vec3::zeros(), |acc, &j| acc + positions[j]) / ring.len() as f64;
            p + factor * (centroid - p)
        })
        .collect()
}

/// Largest umbrella-vector magnitude over vertices, a cheap roughness proxy.
pub fn max_umbrella_magnitude(mesh: &Mesh) -> f64 {
    let neighbors = mesh.vertex_neighbors();
    let v = mesh.vertices();
    neighbors
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(i, r)| {
            let c = r.iter().fold(Vec3::zeros(), |acc, &j| acc + v[j]) / r.len() as f64;
            (c - v[i]).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn planar_grid_is_a_fixed_point() {
        let g = shapes::grid(8, 8, 0.25);
        let seq = taubin_smooth(&g, 5, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        for level in &seq.levels {
            for (a, b) in level.vertices().iter().zip(g.vertices()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn connectivity_is_preserved_and_levels_are_cumulative() {
        let m = shapes::spiked_sphere(2, 1.0);
        let seq = taubin_smooth(&m, 3, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        assert_eq!(seq.levels.len(), 3);
        for l in &seq.levels {
            assert_eq!(l.faces(), m.faces());
        }
        let one_more = taubin_smooth(&seq.levels[1], 1, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        assert_eq!(one_more.levels[0].vertices(), seq.levels[2].vertices());
    }

    #[test]
    fn deterministic() {
        let m = shapes::spiked_sphere(2, 2.0);
        let a = taubin_smooth(&m, 5, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        let b = taubin_smooth(&m, 5, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            for (p, q) in x.vertices().iter().zip(y.vertices()) {
                assert_eq!(p.map(f64::to_bits), q.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn spike_is_damped_monotonically() {
        let m = shapes::spiked_sphere(2, 3.0);
        let seq = taubin_smooth(&m, 5, DEFAULT_LAMBDA, DEFAULT_MU).unwrap();
        let spike = |mesh: &Mesh| mesh.vertices()[0].norm();
        assert!(spike(&seq.levels[0]) < spike(&m));
        let mut last = max_umbrella_magnitude(&m);
        for l in &seq.levels {
            let r = max_umbrella_magnitude(l);
            assert!(r <= last, "{r} > {last}");
            last = r;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = shapes::icosphere(1);
        assert!(taubin_smooth(&m, 0, 0.5, -0.53).is_err());
        assert!(taubin_smooth(&m, 1, 0.5, -0.4).is_err());
        assert!(taubin_smooth(&m, 1, -0.1, -0.4).is_err());
    }

    #[test]
    fn unstable_parameters_blow_up() {
        let m = shapes::icosphere(2);
        let err = taubin_smooth(&m, 200, 1e154, -1e155).unwrap_err();
        assert!(matches!(err, SmoothError::NonFinite { .. } | SmoothError::Mesh(_)));
    }
}
