use std::f64::consts::PI;

use super::FeatureError;
use crate::mesh::Mesh;

/// Per-vertex curvature quantities of one mesh.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    /// Integrated curvature (angle deficit) per vertex.
    pub deficits: Vec<f64>,
    /// Pointwise Gaussian curvature: deficit over barycentric area.
    pub gaussian: Vec<f64>,
    /// Total curvature redistributed proportionally to barycentric area.
    pub target: Vec<f64>,
}

impl CurvatureField {
    pub fn compute(mesh: &Mesh) -> Result<Self, FeatureError> {
        let deficits = angle_deficits(mesh);
        let gaussian = pointwise(mesh, &deficits)?;
        let target = target_curvature(mesh, &deficits)?;
        Ok(CurvatureField {
            deficits,
            gaussian,
            target,
        })
    }
}

/// Angle deficit per vertex: 2π − Σθ for interior vertices, π − Σθ on the
/// boundary, where θ are the incident face angles.
pub fn angle_deficits(mesh: &Mesh) -> Vec<f64> {
    let v = mesh.vertices();
    let mut angle_sum = vec![0.0; v.len()];
    for tri in mesh.faces() {
        for k in 0..3 {
            let (i, j, l) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (e1, e2) = (v[j] - v[i], v[l] - v[i]);
            angle_sum[i] += e1.cross(&e2).norm().atan2(e1.dot(&e2));
        }
    }
    let boundary = mesh.boundary_vertices();
    angle_sum
        .iter()
        .zip(&boundary)
        .map(|(&s, &b)| if b { PI - s } else { 2.0 * PI - s })
        .collect()
}

fn pointwise(mesh: &Mesh, deficits: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let areas = mesh.barycentric_areas();
    deficits
        .iter()
        .zip(&areas)
        .enumerate()
        .map(|(i, (&d, &a))| {
            if a > 0.0 {
                Ok(d / a)
            } else {
                Err(FeatureError::ZeroVertexArea { vertex: i })
            }
        })
        .collect()
}

/// Pointwise Gaussian curvature per vertex.
pub fn gaussian_curvature(mesh: &Mesh) -> Result<Vec<f64>, FeatureError> {
    pointwise(mesh, &angle_deficits(mesh))
}

/// Redistributes the total of `curvature` over the vertices in proportion
/// to their barycentric areas: `k_v = (Σ_j κ_j) · A_v / Σ_f area(f)`.
///
/// `curvature` should be integrated (angle deficits) so the total is
/// conserved.
pub fn target_curvature(mesh: &Mesh, curvature: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let total_area = mesh.surface_area();
    if !(total_area > 0.0) {
        return Err(FeatureError::ZeroTotalArea);
    }
    let total: f64 = curvature.iter().sum();
    Ok(mesh
        .vertex_faces()
        .iter()
        .map(|fs| {
            let a_v: f64 = fs.iter().map(|&f| mesh.face_areas()[f] / 3.0).sum();
            total * a_v / total_area
        })
        .collect())
}
