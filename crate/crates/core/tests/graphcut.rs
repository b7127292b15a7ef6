use meshseg_core::graphcut::{alpha_expansion, refine, smoothness_cost, FlowNetwork, GraphCutProblem, RefineParams};
use meshseg_core::mesh::{shapes, DualGraph, Mesh};
use meshseg_core::numerics::Rng;
use proptest::prelude::*;

type Arcs = Vec<(usize, usize, u32)>;

fn random_network(rng: &mut Rng) -> (usize, Arcs) {
    let n = 2 + rng.below(7);
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.uniform() < 0.45 {
                arcs.push((u, v, 1 + rng.below(5) as u32));
            }
        }
    }
    (n, arcs)
}

fn cut_value(arcs: &Arcs, source_side: &[bool]) -> f64 {
    arcs.iter()
        .filter(|&&(u, v, _)| source_side[u] && !source_side[v])
        .map(|&(_, _, c)| c as f64)
        .sum()
}

/// Minimum over every partition with node 0 on the source side and node
/// `n − 1` on the sink side.
fn brute_min_cut(n: usize, arcs: &Arcs) -> f64 {
    let inner = n - 2;
    (0..1u32 << inner)
        .map(|mask| {
            let side: Vec<bool> = (0..n)
                .map(|i| i == 0 || (i != n - 1 && mask >> (i - 1) & 1 == 1))
                .collect();
            cut_value(arcs, &side)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn max_flow_matches_exhaustive_cut_oracle() {
    let mut rng = Rng::new(11, "maxflow-oracle");
    for _ in 0..100 {
        let (n, arcs) = random_network(&mut rng);
        let mut net = FlowNetwork::new(n);
        for &(u, v, c) in &arcs {
            net.add_arc(u, v, c as f64);
        }
        let flow = net.max_flow(0, n - 1);
        let side = net.source_side(0);
        assert_eq!(flow, brute_min_cut(n, &arcs), "arcs {arcs:?}");
        assert!(side[0] && !side[n - 1]);
        assert_eq!(cut_value(&arcs, &side), flow);
    }
}

fn random_problem(rng: &mut Rng, n: usize, k: usize) -> GraphCutProblem {
    let unary = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.01, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|p| -(p / s).ln()).collect()
        })
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.uniform() < 0.4 {
                edges.push((u, v, rng.uniform_range(0.0, 2.0)));
            }
        }
    }
    GraphCutProblem { unary, edges }
}

fn brute_min_energy(p: &GraphCutProblem) -> f64 {
    let (n, k) = (p.node_count(), p.label_count());
    let mut labels = vec![0; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(p.energy(&labels));
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

#[test]
fn expansion_reaches_exhaustive_optimum_on_tiny_instances() {
    let mut rng = Rng::new(12, "expansion-oracle");
    let mut gaps = Vec::new();
    for case in 0..50 {
        let n = 2 + rng.below(7);
        let k = 2 + rng.below(2);
        let p = random_problem(&mut rng, n, k);
        let r = alpha_expansion(&p);
        assert!(r.energy_trace.windows(2).all(|w| w[1] < w[0]));
        let final_e = *r.energy_trace.last().unwrap();
        assert_eq!(final_e, p.energy(&r.labels));
        let opt = brute_min_energy(&p);
        assert!(final_e <= 2.0 * opt + 1e-12, "case {case}: {final_e} vs optimum {opt}");
        if final_e > opt + 1e-9 {
            gaps.push((case, final_e / opt));
        }
    }
    if !gaps.is_empty() {
        eprintln!("expansion above the exhaustive optimum (tolerated, within 2x): {gaps:?}");
    }
}

#[test]
fn tiny_lambda_returns_argmax() {
    let mesh = shapes::icosphere(2);
    let graph = DualGraph::build(&mesh).unwrap();
    let mut rng = Rng::new(13, "tiny-lambda");
    let n = mesh.face_count();
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..4).map(|_| rng.uniform_range(0.01, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|p| p / s).collect()
        })
        .collect();
    let feature: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let params = RefineParams {
        lambda: 1e-9,
        omega: 0.0,
    };
    let r = refine(&graph, &probs, &feature, params);
    let argmax: Vec<usize> = probs
        .iter()
        .map(|p| (0..4).fold(0, |b, l| if p[l] > p[b] { l } else { b }))
        .collect();
    assert_eq!(r.labels, argmax);
}

#[test]
fn zero_lambda_returns_argmax() {
    let mut rng = Rng::new(14, "zero-lambda");
    let mut p = random_problem(&mut rng, 8, 3);
    for e in &mut p.edges {
        e.2 = 0.0;
    }
    assert_eq!(alpha_expansion(&p).labels, p.argmin_labels());
}

#[test]
fn refinement_removes_label_noise_on_concave_surface() {
    // An inside-out sphere: every dual edge is concave.
    let sphere = shapes::icosphere(3);
    let flipped: Vec<[usize; 3]> = sphere.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
    let mesh = Mesh::new(sphere.vertices().to_vec(), flipped).unwrap();
    let graph = DualGraph::build(&mesh).unwrap();
    assert!(graph.edges().iter().all(|e| e.dihedral < std::f64::consts::PI));
    let n = mesh.face_count();
    let mut rng = Rng::new(15, "denoise");
    let truth: Vec<usize> = mesh.face_centroids().iter().map(|c| usize::from(c.z > 0.0)).collect();
    let probs: Vec<Vec<f64>> = truth
        .iter()
        .map(|&t| {
            let c = if rng.uniform() < 0.15 { 1 - t } else { t };
            let mut p = vec![0.35; 2];
            p[c] = 0.65;
            p
        })
        .collect();
    let noisy = probs.iter().zip(&truth).filter(|(p, &t)| p[t] < 0.5).count();
    assert!(noisy > 0);
    let r = refine(&graph, &probs, &vec![0.0; n], RefineParams { lambda: 20.0, omega: 0.0 });
    let wrong = r.labels.iter().zip(&truth).filter(|(a, b)| a != b).count();
    assert!(wrong * 4 < noisy, "{wrong} wrong after refinement, {noisy} before");
}

#[test]
fn convex_surface_is_left_unchanged() {
    let mesh = shapes::icosphere(2);
    let graph = DualGraph::build(&mesh).unwrap();
    let n = mesh.face_count();
    let probs: Vec<Vec<f64>> = (0..n).map(|f| if f % 3 == 0 { vec![0.4, 0.6] } else { vec![0.6, 0.4] }).collect();
    let r = refine(&graph, &probs, &vec![0.0; n], RefineParams { lambda: 100.0, omega: 0.0 });
    let argmax: Vec<usize> = (0..n).map(|f| usize::from(f % 3 == 0)).collect();
    assert_eq!(r.labels, argmax);
}

proptest! {
    #[test]
    fn smoothness_cost_is_symmetric_and_nonnegative(
        theta in 1e-6f64..(2.0 * std::f64::consts::PI - 1e-6),
        fu in 0.0f64..1.0, fv in 0.0f64..1.0, omega in 0.0f64..5.0,
    ) {
        let a = smoothness_cost(theta, fu, fv, omega);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, smoothness_cost(theta, fv, fu, omega));
    }
}

fn permute_labels(p: &GraphCutProblem, perm: &[usize]) -> GraphCutProblem {
    let unary = p
        .unary
        .iter()
        .map(|u| {
            let mut q = vec![0.0; u.len()];
            for (l, &c) in u.iter().enumerate() {
                q[perm[l]] = c;
            }
            q
        })
        .collect();
    GraphCutProblem {
        unary,
        edges: p.edges.clone(),
    }
}

#[test]
fn expansion_is_label_permutation_equivariant() {
    // The fixed ascending visiting order can stop in different local minima,
    // so exact equivariance is asserted wherever the optimum is reached.
    let perm = [2usize, 0, 1];
    let mut differ = 0;
    for seed in 0..1000 {
        let p = random_problem(&mut Rng::new(seed, "perm"), 7, 3);
        let q = permute_labels(&p, &perm);
        let (a, b) = (alpha_expansion(&p), alpha_expansion(&q));
        let mapped: Vec<usize> = a.labels.iter().map(|&l| perm[l]).collect();
        let opt = brute_min_energy(&p);
        let optimal = |e: &[f64]| (e.last().unwrap() - opt).abs() < 1e-9;
        if optimal(&a.energy_trace) && optimal(&b.energy_trace) {
            assert_eq!(mapped, b.labels, "seed {seed}");
        } else if mapped != b.labels {
            differ += 1;
        }
    }
    eprintln!("label order changed the result on {differ}/1000 instances");
    assert!(differ <= 50);
}
