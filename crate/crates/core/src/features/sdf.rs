//! Shape diameter function: a cone of rays is cast from each face centroid
//! into the surface, and the distances to the first hits are aggregated
//! into a local thickness estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdfParams {
    /// Cone half-angle around the inward normal, in degrees.
    pub cone_half_angle_deg: f64,
    pub rays: usize,
    /// Minimum hit distance, as a fraction of the bounding-box diagonal.
    pub epsilon_rel: f64,
    /// Strength of the log normalization.
    pub log_alpha: f64,
}

impl Default for SdfParams {
    fn default() -> Self {
        SdfParams {
            cone_half_angle_deg: 60.0,
            rays: 30,
            epsilon_rel: 1e-6,
            log_alpha: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdfResult {
    /// Robust mean hit distance per face (model units).
    pub raw: Vec<f64>,
    /// Log-normalized values in [0, 1].
    pub normalized: Vec<f64>,
    /// Faces whose rays hit nothing; their raw value is the median of the rest.
    pub fallback_faces: Vec<usize>,
}

/// Unit directions inside a cone of half-angle `half_angle` around +z,
/// equal-solid-angle rings with golden-angle azimuths.
pub fn cone_directions(half_angle: f64, count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let span = 1.0 - half_angle.cos();
    (0..count)
        .map(|i| {
            let cos_t = 1.0 - span * (i as f64 + 0.5) / count as f64;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
        })
        .collect()
}

/// Rotates +z onto `axis` (unit) and applies it to `local`.
fn to_frame(axis: &Vec3, local: &Vec3) -> Vec3 {
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = axis.cross(&helper).normalize();
    let t2 = axis.cross(&t1);
    t1 * local.x + t2 * local.y + axis * local.z
}

/// Mean of the values within one standard deviation of the median.
pub fn robust_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let kept: Vec<f64> = sorted.iter().copied().filter(|v| (v - median).abs() <= std).collect();
    if kept.is_empty() {
        Some(median)
    } else {
        Some(kept.iter().sum::<f64>() / kept.len() as f64)
    }
}

/// `log(1 + α·t) / log(1 + α)` with `t` the min-max rescaled value.
pub fn log_normalize(values: &[f64], alpha: f64) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|v| (1.0 + alpha * (v - lo) / (hi - lo)).ln() / (1.0 + alpha).ln())
        .collect()
}

pub fn shape_diameter(mesh: &Mesh, params: &SdfParams) -> SdfResult {
    let bvh = Bvh::build(mesh);
    let eps = params.epsilon_rel * mesh.bbox_diagonal();
    let local = cone_directions(params.cone_half_angle_deg.to_radians(), params.rays);
    let per_face: Vec<Option<f64>> = (0..mesh.face_count())
        .into_par_iter()
        .map(|f| {
            let origin = mesh.face_centroids()[f];
            let inward = -mesh.face_normals()[f];
            let hits: Vec<f64> = local
                .iter()
                .filter_map(|d| bvh.first_hit(mesh, &origin, &to_frame(&inward, d), f, eps))
                .collect();
            robust_mean(&hits)
        })
        .collect();
    let found: Vec<f64> = per_face.iter().flatten().copied().collect();
    let fallback = median(&found);
    let fallback_faces: Vec<usize> = per_face
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| i)
        .collect();
    if !fallback_faces.is_empty() {
        log::warn!(
            "SDF: {} of {} faces had no ray hits; using the mesh median",
            fallback_faces.len(),
            mesh.face_count()
        );
    }
    let raw: Vec<f64> = per_face.iter().map(|v| v.unwrap_or(fallback)).collect();
    let normalized = log_normalize(&raw, params.log_alpha);
    SdfResult {
        raw,
        normalized,
        fallback_faces,
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Möller–Trumbore, two-sided. Returns the ray parameter of the hit.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    /// Slab test; entry distance if the ray meets the box before `t_max`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.lo[k] - origin[k]) * inv_dir[k];
            let b = (self.hi[k] - origin[k]) * inv_dir[k];
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            // NaN from 0·∞ (ray in the slab plane) leaves bounds unchanged.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

enum Node {
    Leaf { bounds: Aabb, faces: Vec<usize> },
    Inner { bounds: Aabb, left: usize, right: usize },
}

/// Median-split bounding volume hierarchy over mesh faces.
pub struct Bvh {
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(mesh: &Mesh) -> Self {
        let mut bvh = Bvh { nodes: Vec::new() };
        let faces: Vec<usize> = (0..mesh.face_count()).collect();
        if !faces.is_empty() {
            bvh.build_node(mesh, faces);
        }
        bvh
    }

    fn build_node(&mut self, mesh: &Mesh, mut faces: Vec<usize>) -> usize {
        let mut bounds = Aabb::empty();
        let mut centroid_bounds = Aabb::empty();
        for &f in &faces {
            for &v in &mesh.faces()[f] {
                bounds.grow(&mesh.vertices()[v]);
            }
            centroid_bounds.grow(&mesh.face_centroids()[f]);
        }
        let idx = self.nodes.len();
        if faces.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, faces });
            return idx;
        }
        let extent = centroid_bounds.hi - centroid_bounds.lo;
        let axis = (0..3).max_by(|&a, &b| extent[a].total_cmp(&extent[b])).unwrap();
        let c = mesh.face_centroids();
        faces.sort_by(|&a, &b| c[a][axis].total_cmp(&c[b][axis]).then(a.cmp(&b)));
        let right_faces = faces.split_off(faces.len() / 2);
        self.nodes.push(Node::Leaf {
            bounds,
            faces: Vec::new(),
        });
        let left = self.build_node(mesh, faces);
        let right = self.build_node(mesh, right_faces);
        self.nodes[idx] = Node::Inner { bounds, left, right };
        idx
    }

    /// Closest hit distance along `dir` (unit), skipping `skip_face` and
    /// hits nearer than `eps`.
    pub fn first_hit(&self, mesh: &Mesh, origin: &Vec3, dir: &Vec3, skip_face: usize, eps: f64) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Leaf { bounds, faces } => {
                    if bounds.hit(origin, &inv_dir, best).is_none() {
                        continue;
                    }
                    for &f in faces {
                        if f == skip_face {
                            continue;
                        }
                        let [a, b, c] = mesh.faces()[f];
                        let v = mesh.vertices();
                        if let Some(t) = ray_triangle(origin, dir, &v[a], &v[b], &v[c]) {
                            if t > eps && t < best {
                                best = t;
                            }
                        }
                    }
                }
                Node::Inner { bounds, left, right } => {
                    if bounds.hit(origin, &inv_dir, best).is_some() {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.is_finite().then_some(best)
    }
}
