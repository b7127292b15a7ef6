//! Analytic test shapes. All closed shapes are outward-oriented.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Mesh, Vec3};

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Mesh {
    Mesh::new(vertices, faces).expect("generated shape is valid")
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron() -> Mesh {
    let s = 1.0 / 3f64.sqrt();
    build(
        vec![
            Vec3::new(s, s, s),
            Vec3::new(s, -s, -s),
            Vec3::new(-s, s, -s),
            Vec3::new(-s, -s, s),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Unit cube [0,1]³, two triangles per side.
pub fn cube() -> Mesh {
    let v = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let quads = [
        [0, 2, 3, 1], // z = 0
        [4, 5, 7, 6], // z = 1
        [0, 1, 5, 4], // y = 0
        [2, 6, 7, 3], // y = 1
        [0, 4, 6, 2], // x = 0
        [1, 3, 7, 5], // x = 1
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    build(v, faces)
}

/// Unit-radius icosphere; `level` rounds of 4:1 subdivision.
pub fn icosphere(level: usize) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a] + v[b]) / 2.0).normalize());
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(v, faces)
}

/// Icosphere with vertex 0 pushed radially outward to radius `1 + amplitude`.
pub fn spiked_sphere(level: usize, amplitude: f64) -> Mesh {
    let base = icosphere(level);
    let mut v = base.vertices().to_vec();
    v[0] *= 1.0 + amplitude;
    base.with_positions(v).expect("spike keeps faces valid")
}

/// Planar grid in z = 0 with `nx × ny` cells of size `spacing`, every cell
/// split along the same diagonal so interior one-rings are point-symmetric.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> Mesh {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut v = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            v.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut f = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    build(v, f)
}

/// Open strip shaped like a stair step: floor, wall, top. The floor/wall
/// junction is the single inner (concave) corner.
pub fn step_strip() -> Mesh {
    let profile = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0)];
    let ny = 2;
    let mut v = Vec::new();
    for &(x, z) in &profile {
        for j in 0..=ny {
            v.push(Vec3::new(x, j as f64 * 0.5, z));
        }
    }
    let idx = |i: usize, j: usize| i * (ny + 1) + j;
    let mut f = Vec::new();
    for i in 0..profile.len() - 1 {
        for j in 0..ny {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    build(v, f)
}

/// Closed surface of revolution about the z axis. `profile` lists
/// (radius, z) pairs from bottom to top; the first and last radius must be
/// zero and become poles.
pub fn revolution(profile: &[(f64, f64)], segments: usize) -> Mesh {
    assert!(profile.len() >= 3 && segments >= 3);
    assert!(profile[0].0 == 0.0 && profile[profile.len() - 1].0 == 0.0);
    let rings = &profile[1..profile.len() - 1];
    let mut v = vec![Vec3::new(0.0, 0.0, profile[0].1)];
    for &(r, z) in rings {
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            v.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    let top = v.len();
    v.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].1));
    let ring = |k: usize, s: usize| 1 + k * segments + s % segments;
    let mut f = Vec::new();
    for s in 0..segments {
        f.push([0, ring(0, s + 1), ring(0, s)]);
    }
    for k in 0..rings.len() - 1 {
        for s in 0..segments {
            let (a, b) = (ring(k, s), ring(k, s + 1));
            let (c, d) = (ring(k + 1, s + 1), ring(k + 1, s));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for s in 0..segments {
        f.push([top, ring(last, s), ring(last, s + 1)]);
    }
    build(v, f)
}

/// Closed cylinder of the given radius and half-length, with `rings`
/// subdivisions along the axis.
pub fn cylinder(radius: f64, half_length: f64, rings: usize, segments: usize) -> Mesh {
    let mut profile = vec![(0.0, -half_length)];
    for k in 0..=rings {
        profile.push((radius, -half_length + 2.0 * half_length * k as f64 / rings as f64));
    }
    profile.push((0.0, half_length));
    revolution(&profile, segments)
}
