use std::collections::VecDeque;
use std::f64::consts::PI;

use super::{Mesh, MeshError};

/// An edge of the dual graph: two faces sharing one mesh edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEdge {
    /// Smaller face id.
    pub a: usize,
    /// Larger face id.
    pub b: usize,
    /// Exterior dihedral angle in (0, 2π): below π at concave edges, π when
    /// flat, above π at convex edges.
    pub dihedral: f64,
    /// Length of the shared mesh edge.
    pub length: f64,
}

/// Face-adjacency graph: faces are nodes, shared mesh edges are edges.
/// Boundary mesh edges produce no dual edge.
#[derive(Debug, Clone)]
pub struct DualGraph {
    edges: Vec<DualEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl DualGraph {
    pub fn build(mesh: &Mesh) -> Result<Self, MeshError> {
        let normals = mesh.face_normals();
        let centroids = mesh.face_centroids();
        let mut edges = Vec::new();
        for (key, faces) in mesh.edges() {
            match faces.len() {
                1 => continue,
                2 => {}
                count => {
                    return Err(MeshError::NonManifoldEdge {
                        a: key[0],
                        b: key[1],
                        count,
                    })
                }
            }
            let (a, b) = (faces[0].min(faces[1]), faces[0].max(faces[1]));
            let (na, nb) = (normals[a], normals[b]);
            // atan2 form stays accurate for nearly parallel normals.
            let alpha = na.cross(&nb).norm().atan2(na.dot(&nb));
            let concave = (centroids[b] - centroids[a]).dot(&na) > 0.0;
            let dihedral = if concave { PI - alpha } else { PI + alpha };
            let v = mesh.vertices();
            let length = (v[key[0]] - v[key[1]]).norm();
            edges.push(DualEdge {
                a,
                b,
                dihedral,
                length,
            });
        }
        edges.sort_by_key(|e| (e.a, e.b));
        let mut adjacency = vec![Vec::new(); mesh.face_count()];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, i));
            adjacency[e.b].push((e.a, i));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(DualGraph { edges, adjacency })
    }

    /// Builds a graph directly from an edge list (used by tests and the
    /// synthetic generators).
    pub fn from_edges(node_count: usize, mut edges: Vec<DualEdge>) -> Self {
        for e in &mut edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        let mut adjacency = vec![Vec::new(); node_count];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, i));
            adjacency[e.b].push((e.a, i));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        DualGraph { edges, adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[DualEdge] {
        &self.edges
    }

    /// Neighbors of face `u` as (face, edge index) pairs, sorted by face.
    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adjacency[u]
    }

    /// Connected components; returns component id per face and the count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

/// BFS ball of radius `hops` around `u`, inclusive of `u`, sorted ascending.
pub fn face_neighborhood(graph: &DualGraph, u: usize, hops: usize) -> Vec<usize> {
    let mut seen = vec![false; graph.node_count()];
    let mut ball = vec![u];
    seen[u] = true;
    let mut queue = VecDeque::from([(u, 0usize)]);
    while let Some((f, d)) = queue.pop_front() {
        if d == hops {
            continue;
        }
        for &(g, _) in graph.neighbors(f) {
            if !seen[g] {
                seen[g] = true;
                ball.push(g);
                queue.push_back((g, d + 1));
            }
        }
    }
    ball.sort_unstable();
    ball
}
