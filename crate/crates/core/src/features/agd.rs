use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::mesh::{DualGraph, Mesh};

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dual-graph edge weights: centroid-to-centroid distance.
pub fn centroid_edge_weights(mesh: &Mesh, graph: &DualGraph) -> Vec<f64> {
    let c = mesh.face_centroids();
    graph.edges().iter().map(|e| (c[e.a] - c[e.b]).norm()).collect()
}

/// Single-source shortest distances over the dual graph; unreachable faces
/// are `INFINITY`.
pub fn dijkstra(graph: &DualGraph, weights: &[f64], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, source)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, e) in graph.neighbors(u) {
            let nd = d + weights[e];
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// Mean geodesic distance from each face to every face of its connected
/// component (including itself), before normalization.
pub fn raw_average_geodesic_distance(mesh: &Mesh, graph: &DualGraph) -> Vec<f64> {
    let weights = centroid_edge_weights(mesh, graph);
    (0..graph.node_count())
        .into_par_iter()
        .map(|u| {
            let d = dijkstra(graph, &weights, u);
            let (sum, count) = d
                .iter()
                .filter(|x| x.is_finite())
                .fold((0.0, 0usize), |(s, c), &x| (s + x, c + 1));
            sum / count as f64
        })
        .collect()
}

/// Average geodesic distance per face, divided by its maximum over the
/// mesh so values lie in [0, 1]. Disconnected meshes are averaged per
/// component and normalized by the global maximum.
pub fn average_geodesic_distance(mesh: &Mesh, graph: &DualGraph) -> Vec<f64> {
    let raw = raw_average_geodesic_distance(mesh, graph);
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|v| v / max).collect()
    } else {
        // Every component is a single face.
        vec![1.0; raw.len()]
    }
}
