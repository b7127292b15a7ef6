use super::{FeatureError, FeatureMatrix};
use crate::mesh::{face_neighborhood, DualGraph};

pub const MAX_SCALES: usize = 4;

/// `scales[k]` holds `X^{k+1}`: each face's row averaged over its `k`-hop
/// dual-graph neighborhood (the face itself included).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleFeatures {
    pub scales: Vec<FeatureMatrix>,
}

impl MultiScaleFeatures {
    pub fn branch_count(&self) -> usize {
        self.scales.len()
    }

    pub fn faces(&self) -> usize {
        self.scales.first().map_or(0, |s| s.faces())
    }

    pub fn dim(&self) -> usize {
        self.scales.first().map_or(0, |s| s.dim())
    }
}

pub fn multiscale(fm: &FeatureMatrix, graph: &DualGraph, k: usize) -> Result<MultiScaleFeatures, FeatureError> {
    if !(1..=MAX_SCALES).contains(&k) {
        return Err(FeatureError::Shape(format!("branch count {k} outside 1..={MAX_SCALES}")));
    }
    if graph.node_count() != fm.faces() {
        return Err(FeatureError::Shape(format!(
            "dual graph has {} nodes but the feature matrix {} faces",
            graph.node_count(),
            fm.faces()
        )));
    }
    let d = fm.dim();
    let mut scales = vec![fm.clone()];
    for hops in 1..k {
        let mut values = Vec::with_capacity(fm.values().len());
        for u in 0..fm.faces() {
            let ball = face_neighborhood(graph, u, hops);
            let mut acc = vec![0.0; d];
            for &v in &ball {
                for (a, x) in acc.iter_mut().zip(fm.row(v)) {
                    *a += x;
                }
            }
            values.extend(acc.iter().map(|a| a / ball.len() as f64));
        }
        scales.push(FeatureMatrix::new(fm.channels().to_vec(), fm.faces(), values)?);
    }
    Ok(MultiScaleFeatures { scales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DualEdge;
    use proptest::prelude::*;

    fn path(n: usize) -> DualGraph {
        let edges = (0..n - 1)
            .map(|i| DualEdge {
                a: i,
                b: i + 1,
                dihedral: std::f64::consts::PI,
                length: 1.0,
            })
            .collect();
        DualGraph::from_edges(n, edges)
    }

    fn column(vals: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_columns(vec![("x".into(), vals.to_vec())]).unwrap()
    }

    #[test]
    fn single_scale_is_identity() {
        let fm = column(&[1.0, 4.0, 7.0]);
        let ms = multiscale(&fm, &path(3), 1).unwrap();
        assert_eq!(ms.scales, vec![fm]);
    }

    #[test]
    fn one_hop_mean() {
        let fm = column(&[1.0, 4.0, 7.0]);
        let ms = multiscale(&fm, &path(3), 2).unwrap();
        assert_eq!(ms.scales[1].row(1), &[4.0]);
        assert_eq!(ms.scales[1].row(0), &[2.5]);
    }

    #[test]
    fn constant_field_stays_constant() {
        let fm = column(&[3.0; 6]);
        let ms = multiscale(&fm, &path(6), 4).unwrap();
        assert!(ms.scales.iter().all(|s| s.values().iter().all(|&v| v == 3.0)));
    }

    #[test]
    fn rejects_bad_branch_count() {
        let fm = column(&[1.0]);
        assert!(multiscale(&fm, &path(1), 0).is_err());
        assert!(multiscale(&fm, &path(1), 5).is_err());
    }

    proptest! {
        #[test]
        fn linear(a in -3.0..3.0f64, b in -3.0..3.0f64,
                  f in prop::collection::vec(-10.0..10.0f64, 7),
                  g in prop::collection::vec(-10.0..10.0f64, 7)) {
            let graph = path(7);
            let (ff, gg) = (column(&f), column(&g));
            let lhs = multiscale(&ff.combine(a, &gg, b).unwrap(), &graph, 3).unwrap();
            let mf = multiscale(&ff, &graph, 3).unwrap();
            let mg = multiscale(&gg, &graph, 3).unwrap();
            for k in 0..3 {
                let rhs = mf.scales[k].combine(a, &mg.scales[k], b).unwrap();
                for (x, y) in lhs.scales[k].values().iter().zip(rhs.values()) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }
}
