//! End-to-end acceptance criteria. Prints one `PASS`/`FAIL` line per
//! criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use meshseg_core::config::ExperimentConfig;
use meshseg_core::eval::{accuracy, prepare_meshes, train_split, PreparedMesh};
use meshseg_core::features::agd::{centroid_edge_weights, dijkstra};
use meshseg_core::features::{
    angle_deficits, conformal_factor, gaussian_curvature, smoothed_conformal_factor, target_curvature, vertex_to_face,
};
use meshseg_core::graphcut::{alpha_expansion, FlowNetwork, GraphCutProblem};
use meshseg_core::mesh::{shapes, Vec3};
use meshseg_core::neural::gradcheck::{layer_suite, network_suite, LAYER_TOLERANCE, NETWORK_TOLERANCE};
use meshseg_core::neural::network::build_multibranch;
use meshseg_core::neural::{Mode, ModelKind, Tensor};
use meshseg_core::numerics::Rng;
use meshseg_core::smoothing::{laplacian_smooth, taubin_smooth, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU};
use meshseg_core::synthetic::{toy_dataset, write_dataset};
use meshseg_core::{DualGraph, Mesh};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn gradient_suite() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for (kind, r) in layer_suite(7, 20).map_err(|e| e.to_string())? {
        check(r.checked > 0, format!("{kind:?}: nothing checked"))?;
        check(
            r.max_rel_error <= LAYER_TOLERANCE,
            format!("{kind:?}: {:.2e} in {}", r.max_rel_error, r.worst_group),
        )?;
        worst = worst.max(r.max_rel_error);
    }
    let net = network_suite(7, 20).map_err(|e| e.to_string())?;
    check(net.max_rel_error <= NETWORK_TOLERANCE, format!("network: {:.2e}", net.max_rel_error))?;
    let secs = t.elapsed().as_secs_f64();
    check(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("layers {worst:.2e}, network {:.2e}, {secs:.1} s", net.max_rel_error))
}

fn architecture_shapes() -> Outcome {
    let mut net = build_multibranch(3, 800, 2, 0).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(0, "shapes");
    let inputs: Vec<Tensor> = (0..3)
        .map(|_| Tensor::from_vec(2, 1, 800, (0..1600).map(|_| rng.gaussian()).collect()).unwrap())
        .collect();
    let mut x = inputs[0].clone();
    for layer in &mut net.branches[0][..4] {
        x = layer.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
    }
    check(x.shape() == (2, 16, 400), format!("first block {:?}", x.shape()))?;
    let branches = net.forward_branches(&inputs, Mode::Train).map_err(|e| e.to_string())?;
    for b in &branches {
        check(b.shape() == (2, 32, 200), format!("branch {:?}", b.shape()))?;
    }
    let concat = net.forward_concat(&inputs, Mode::Train).map_err(|e| e.to_string())?;
    check(concat.shape() == (2, 96, 200), format!("concat {:?}", concat.shape()))?;
    let out = net.forward(&inputs, Mode::Train).map_err(|e| e.to_string())?;
    check(out.shape() == (2, 2, 1), format!("output {:?}", out.shape()))?;
    Ok("800 -> 16x400 -> 32x200 per branch -> 96x200".into())
}

fn cnn_config(branches: usize, epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(r#"{"dataset": "manifest.json", "output": "out"}"#).unwrap();
    cfg.model = ModelKind::Cnn { branches };
    cfg.train.epochs = epochs;
    cfg
}

/// Pooled area-weighted accuracy of the argmax labels over `meshes`.
fn pooled_accuracy(clf: &mut meshseg_core::neural::Classifier, meshes: &[&PreparedMesh]) -> Result<f64, String> {
    let (mut pred, mut truth, mut areas) = (Vec::new(), Vec::new(), Vec::new());
    for m in meshes {
        let probs = clf.predict(&m.features, &m.graph).map_err(|e| e.to_string())?;
        pred.extend(probs.iter().map(|p| (0..p.len()).fold(0, |b, l| if p[l] > p[b] { l } else { b })));
        truth.extend_from_slice(&m.labels);
        areas.extend_from_slice(&m.areas);
    }
    accuracy(&pred, &truth, &areas).map_err(|e| e.to_string())
}

fn overfit() -> Outcome {
    let t = Instant::now();
    let ds = toy_dataset(4, 21);
    let cfg = cnn_config(3, 50);
    let (meshes, _) = prepare_meshes(&ds, &cfg.features, None).map_err(|e| e.to_string())?;
    let faces: usize = meshes.iter().map(|m| m.labels.len()).sum();
    let (mut clf, _) = train_split(&meshes, &ds.ids(), 2, &cfg, 5).map_err(|e| e.to_string())?;
    let acc = pooled_accuracy(&mut clf, &meshes.iter().collect::<Vec<_>>())?;
    let secs = t.elapsed().as_secs_f64();
    check(acc >= 0.95, format!("training accuracy {acc:.4}"))?;
    check(secs < 600.0, format!("took {secs:.1} s"))?;
    Ok(format!("training accuracy {acc:.4} on {faces} faces, {secs:.1} s"))
}

fn branch_trend() -> Outcome {
    let (mut one, mut three) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let ds = toy_dataset(8, 100 + seed);
        let cfg = cnn_config(1, 20);
        let (meshes, _) = prepare_meshes(&ds, &cfg.features, None).map_err(|e| e.to_string())?;
        let train: Vec<String> = ds.ids()[..4].to_vec();
        let test: Vec<&PreparedMesh> = meshes[4..].iter().collect();
        for (k, out) in [(1, &mut one), (3, &mut three)] {
            let cfg = cnn_config(k, 20);
            let (mut clf, _) = train_split(&meshes, &train, 2, &cfg, seed).map_err(|e| e.to_string())?;
            out.push(pooled_accuracy(&mut clf, &test)?);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m3) = (mean(&one), mean(&three));
    let detail = format!("K=1 {m1:.4}, K=3 {m3:.4} (per seed {one:.3?} / {three:.3?})");
    check(m3 >= m1 - 0.005, detail.clone())?;
    Ok(detail)
}

fn conformal_suite() -> Outcome {
    for m in [shapes::icosphere(3), shapes::spiked_sphere(3, 2.0), shapes::cube(), toy_dataset(1, 0).meshes[0].mesh.clone()] {
        let k = gaussian_curvature(&m).map_err(|e| e.to_string())?;
        let total: f64 = k.iter().zip(m.barycentric_areas()).map(|(k, a)| k * a).sum();
        let expected = 2.0 * PI * m.euler_characteristic() as f64;
        check((total - expected).abs() <= 1e-6, format!("Gauss-Bonnet {total} vs {expected}"))?;
        let d = angle_deficits(&m);
        let t = target_curvature(&m, &d).map_err(|e| e.to_string())?;
        let (st, sd) = (t.iter().sum::<f64>(), d.iter().sum::<f64>());
        check((st - sd).abs() <= 1e-9 * sd.abs(), format!("target total {st} vs {sd}"))?;
    }
    let sphere = max_abs(&conformal_factor(&shapes::icosphere(3)).map_err(|e| e.to_string())?);
    let spiked = max_abs(&conformal_factor(&shapes::spiked_sphere(3, 1.0)).map_err(|e| e.to_string())?);
    check(sphere <= 1e-3 * spiked, format!("icosphere factor {sphere:.2e} vs spiked {spiked:.2e}"))?;
    let mut ratios = Vec::new();
    for amp in [1.0, 2.0, 3.0] {
        let m = shapes::spiked_sphere(3, amp);
        let seq = taubin_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU).map_err(|e| e.to_string())?;
        let original = max_abs(&vertex_to_face(&m, &conformal_factor(&m).map_err(|e| e.to_string())?));
        let first = max_abs(&vertex_to_face(&m, &smoothed_conformal_factor(&seq).map_err(|e| e.to_string())?[0]));
        check(first < original, format!("amplitude {amp}: {first} vs {original}"))?;
        ratios.push(first / original);
    }
    let big = shapes::spiked_sphere(5, 1.0);
    let t = Instant::now();
    conformal_factor(&big).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    check(big.vertex_count() >= 10_000 && secs < 5.0, format!("{} vertices took {secs:.2} s", big.vertex_count()))?;
    Ok(format!(
        "icosphere |phi| {sphere:.1e}, smoothed/original {ratios:.3?}, {} vertex solve {secs:.2} s",
        big.vertex_count()
    ))
}

type Arcs = Vec<(usize, usize, f64)>;

fn cut_value(arcs: &Arcs, side: &[bool]) -> f64 {
    arcs.iter().filter(|a| side[a.0] && !side[a.1]).map(|a| a.2).sum()
}

fn brute_min_cut(n: usize, arcs: &Arcs) -> f64 {
    (0..1u32 << (n - 2))
        .map(|mask| {
            let side: Vec<bool> = (0..n).map(|i| i == 0 || (i != n - 1 && mask >> (i - 1) & 1 == 1)).collect();
            cut_value(arcs, &side)
        })
        .fold(f64::INFINITY, f64::min)
}

fn brute_min_energy(p: &GraphCutProblem) -> f64 {
    let (n, k) = (p.node_count(), p.label_count());
    (0..k.pow(n as u32))
        .map(|mut code| {
            let labels: Vec<usize> = (0..n)
                .map(|_| {
                    let l = code % k;
                    code /= k;
                    l
                })
                .collect();
            p.energy(&labels)
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_problem(rng: &mut Rng, n: usize, k: usize, pairwise: f64) -> GraphCutProblem {
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
                edges.push((u, v, pairwise * rng.uniform_range(0.0, 2.0)));
            }
        }
    }
    GraphCutProblem { unary, edges }
}

fn graph_cut_suite() -> Outcome {
    let mut rng = Rng::new(31, "acceptance/maxflow");
    for case in 0..100 {
        let n = 2 + rng.below(7);
        let mut arcs = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.uniform() < 0.45 {
                    arcs.push((u, v, (1 + rng.below(5)) as f64));
                }
            }
        }
        let mut net = FlowNetwork::new(n);
        for &(u, v, c) in &arcs {
            net.add_arc(u, v, c);
        }
        let flow = net.max_flow(0, n - 1);
        let oracle = brute_min_cut(n, &arcs);
        check(flow == oracle, format!("max-flow case {case}: {flow} vs {oracle}"))?;
    }
    let mut rng = Rng::new(32, "acceptance/expansion");
    let (mut equal, mut worst) = (0, 1.0f64);
    for case in 0..50 {
        let (n, k) = (2 + rng.below(7), 2 + rng.below(2));
        let p = random_problem(&mut rng, n, k, 1.0);
        let r = alpha_expansion(&p);
        check(r.energy_trace.windows(2).all(|w| w[1] < w[0]), format!("case {case}: trace not decreasing"))?;
        let (e, opt) = (*r.energy_trace.last().unwrap(), brute_min_energy(&p));
        check(e <= 2.0 * opt + 1e-12, format!("case {case}: {e} vs optimum {opt}"))?;
        if e <= opt + 1e-9 {
            equal += 1;
        }
        worst = worst.max(e / opt);
    }
    for case in 0..20 {
        let p = random_problem(&mut rng, 8, 3, 1e-9);
        check(alpha_expansion(&p).labels == p.argmin_labels(), format!("lambda -> 0 case {case}"))?;
    }
    Ok(format!("max-flow 100/100 exact; expansion optimal on {equal}/50, worst ratio {worst:.4}; lambda -> 0 gives argmax"))
}

fn floyd_warshall(graph: &DualGraph, w: &[f64]) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (e, edge) in graph.edges().iter().enumerate() {
        d[edge.a][edge.b] = d[edge.a][edge.b].min(w[e]);
        d[edge.b][edge.a] = d[edge.b][edge.a].min(w[e]);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn agd_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let mut rng = Rng::new(i, "acceptance/agd");
        let base = match i % 4 {
            0 => shapes::tetrahedron(),
            1 => shapes::cube(),
            2 => shapes::icosphere(0),
            _ => {
                let nx = 1 + rng.below(5);
                shapes::grid(nx, 1 + rng.below(25 / nx).min(4), 0.5)
            }
        };
        let moved = base
            .vertices()
            .iter()
            .map(|p| p + Vec3::new(rng.gaussian(), rng.gaussian(), rng.gaussian()) * 0.03)
            .collect();
        let mesh: Mesh = base.with_positions(moved).map_err(|e| e.to_string())?;
        check(mesh.face_count() <= 50, "mesh too large")?;
        let graph = DualGraph::build(&mesh).map_err(|e| e.to_string())?;
        let integer: Vec<f64> = graph.edges().iter().map(|_| (1 + rng.below(9)) as f64).collect();
        let oracle = floyd_warshall(&graph, &integer);
        for s in 0..graph.node_count() {
            check(dijkstra(&graph, &integer, s) == oracle[s], format!("mesh {i} source {s}"))?;
        }
        let w = centroid_edge_weights(&mesh, &graph);
        let oracle = floyd_warshall(&graph, &w);
        for s in 0..graph.node_count() {
            for (a, b) in dijkstra(&graph, &w, s).iter().zip(&oracle[s]) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("centroid weights differ by {worst:.2e}"))?;
    Ok(format!("20 meshes: integer weights exact, centroid weights within {worst:.1e}"))
}

fn taubin_volume() -> Outcome {
    let m = shapes::icosphere(2);
    let v0 = m.signed_volume();
    let seq = taubin_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU).map_err(|e| e.to_string())?;
    let taubin = (seq.levels[DEFAULT_ITERATIONS - 1].signed_volume() - v0).abs() / v0;
    let plain = laplacian_smooth(&m, DEFAULT_ITERATIONS, DEFAULT_LAMBDA).map_err(|e| e.to_string())?;
    let shrink = (v0 - plain[DEFAULT_ITERATIONS - 1].signed_volume()) / v0;
    check(taubin <= 0.02, format!("Taubin volume change {taubin:.4}"))?;
    check(shrink > 0.05, format!("Laplacian shrink {shrink:.4}"))?;
    Ok(format!("Taubin volume change {:.3}%, Laplacian shrink {:.2}%", 100.0 * taubin, 100.0 * shrink))
}

fn accuracy_metric() -> Outcome {
    let fixtures: [(&[usize], &[usize], &[f64], f64); 4] = [
        (&[1, 1], &[0, 1], &[1.0, 3.0], 0.75),
        (&[0, 1, 2], &[0, 1, 2], &[1.0, 2.0, 3.0], 1.0),
        (&[0, 1, 1, 0], &[0, 1, 0, 1], &[2.0; 4], 0.5),
        (&[2, 0, 0], &[1, 0, 1], &[0.5, 0.25, 0.25], 0.25),
    ];
    for (pred, truth, areas, want) in fixtures {
        let got = accuracy(pred, truth, areas).map_err(|e| e.to_string())?;
        check(got == want, format!("{pred:?} vs {truth:?}: {got} != {want}"))?;
    }
    let m = &toy_dataset(1, 3).meshes[0];
    let pred: Vec<usize> = m.labels.iter().enumerate().map(|(f, l)| (l + usize::from(f % 5 == 0)) % 2).collect();
    let base = accuracy(&pred, &m.labels, m.mesh.face_areas()).map_err(|e| e.to_string())?;
    for s in [1e-3, 0.5, 7.0, 1e3] {
        let scaled = m.mesh.with_positions(m.mesh.vertices().iter().map(|v| v * s).collect()).unwrap();
        let a = accuracy(&pred, &m.labels, scaled.face_areas()).map_err(|e| e.to_string())?;
        check((a - base).abs() <= 1e-12, format!("scale {s}: {a} vs {base}"))?;
    }
    Ok(format!("4 fixtures exact, scale invariance at {base:.4}"))
}

fn run_once(config: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_meshseg"))
        .args(["--threads", "1", "run", "--config", config.to_str().unwrap()])
        .env_remove("MESHSEG_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let dir = config.parent().unwrap().join("out");
    let report = std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())?;
    std::fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(report)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    write_dataset(&toy_dataset(10, 1), &d.join("data")).map_err(|e| e.to_string())?;
    let config = d.join("exp.json");
    std::fs::write(
        &config,
        r#"{
  "dataset": "data/manifest.json",
  "protocol": {"kind": "k-fold", "k": 5},
  "model": {"kind": "cnn", "branches": 3},
  "train": {"epochs": 2},
  "replicates": 3,
  "seed": 42,
  "output": "out"
}"#,
    )
    .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let a = run_once(&config)?;
    let b = run_once(&config)?;
    check(a == b, "reports differ")?;
    Ok(format!("{} byte report identical across two runs, {:.1} s", a.len(), t.elapsed().as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient suite", gradient_suite),
        ("architecture shape contract", architecture_shapes),
        ("overfit 3-branch CNN", overfit),
        ("branch-count trend", branch_trend),
        ("conformal-factor suite", conformal_suite),
        ("graph-cut suite", graph_cut_suite),
        ("AGD against Floyd-Warshall", agd_oracle),
        ("Taubin smoothing", taubin_volume),
        ("accuracy metric", accuracy_metric),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
