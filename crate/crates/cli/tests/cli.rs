use std::path::Path;
use std::process::{Command, Output};

use meshseg_core::synthetic::{toy_dataset, write_dataset};

fn meshseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshseg"))
        .args(args)
        .env_remove("MESHSEG_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = meshseg(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let last = stdout.lines().last().expect("summary line");
    let v: serde_json::Value = serde_json::from_str(last).expect("summary is JSON");
    assert_eq!(v["status"], "ok");
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_reported() {
    let out = meshseg(&["eval", "--bogus", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.off");
    let out = meshseg(&["smooth", "--mesh", s(&missing), "--out", s(&dir.path().join("o.off"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[io]") && err.contains("missing.off"), "{err}");
}

#[test]
fn invalid_thread_variable_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_meshseg"))
        .args(["gradcheck", "--shapes", "1"])
        .env("MESHSEG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MESHSEG_THREADS"));
}

#[test]
fn gradcheck_prints_verdict() {
    let out = meshseg(&["gradcheck", "--seed", "7", "--shapes", "2"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("gradcheck seed=7") && l.ends_with("PASS")), "{stdout}");
}

#[test]
fn smooth_and_features() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(1, 2);
    write_dataset(&ds, dir.path()).unwrap();
    let mesh = dir.path().join("toy00.off");
    let smoothed = dir.path().join("smooth.off");
    let v = ok(&["smooth", "--mesh", s(&mesh), "--out", s(&smoothed)]);
    let (before, after) = (v["volume_before"].as_f64().unwrap(), v["volume_after"].as_f64().unwrap());
    assert!((after - before).abs() / before < 0.05);
    let feat = dir.path().join("toy00.msegfeat");
    let v = ok(&["features", "--mesh", s(&mesh), "--out", s(&feat)]);
    assert_eq!(v["channels"].as_array().unwrap().len(), 9);
    assert_eq!(v["faces"], ds.meshes[0].mesh.face_count());
    assert!(std::fs::read(&feat).unwrap().starts_with(b"MSEGFEAT"));
}

#[test]
fn train_segment_refine_eval_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = write_dataset(&toy_dataset(3, 5), d).unwrap();
    let model = d.join("model.msegmodl");
    let v = ok(&["train", "--dataset", s(&manifest), "--out", s(&model), "--epochs", "2", "--seed", "11"]);
    assert_eq!(v["seed"], 11);
    let mesh = d.join("toy00.off");
    let probs = d.join("p.msegprob");
    let argmax = d.join("argmax.seg");
    ok(&["segment", "--model", s(&model), "--mesh", s(&mesh), "--out", s(&probs), "--labels", s(&argmax)]);
    let refined = d.join("refined.seg");
    let v = ok(&[
        "refine", "--probs", s(&probs), "--mesh", s(&mesh), "--lambda", "1", "--omega", "1", "--out", s(&refined),
    ]);
    assert!(v["energy_final"].as_f64().unwrap() <= v["energy_initial"].as_f64().unwrap());
    let v = ok(&["eval", "--mesh", s(&mesh), "--labels", s(&refined), "--truth", s(&d.join("toy00.seg"))]);
    let acc = v["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let (a, b) = (d.join("a.ply"), d.join("b.ply"));
    for out in [&a, &b] {
        ok(&["export-colored", s(out), "--labels", s(&refined), "--mesh", s(&mesh)]);
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let faces = std::fs::read_to_string(&refined).unwrap().lines().count();
    assert!(text.contains(&format!("element face {faces}\n")));

    // Tampered artifacts are rejected with the format category.
    let mut bytes = std::fs::read(&model).unwrap();
    bytes[8] = 42;
    std::fs::write(&model, bytes).unwrap();
    let out = meshseg(&["segment", "--model", s(&model), "--mesh", s(&mesh), "--out", s(&probs)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn run_writes_report_and_reuses_caches() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_dataset(&toy_dataset(4, 6), &d.join("data")).unwrap();
    let config = d.join("exp.json");
    std::fs::write(
        &config,
        r#"{
            "dataset": "data/manifest.json",
            "protocol": {"kind": "leave-one-out"},
            "model": {"kind": "pca-nn"},
            "train": {"epochs": 2},
            "replicates": 1,
            "seed": 3,
            "output": "out"
        }"#,
    )
    .unwrap();
    let v = ok(&["run", "--config", s(&config)]);
    assert_eq!(v["records"], 4);
    assert_eq!(v["cache_computed"], 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["config"]["model"]["kind"], "pca-nn");
    for i in 0..4 {
        assert!(d.join(format!("out/labels/toy{i:02}.r0.seg")).exists());
    }
    let v = ok(&["run", "--config", s(&config)]);
    assert_eq!(v["cache_reused"], 4);
    assert_eq!(v["cache_computed"], 0);

    std::fs::write(&config, r#"{"dataset": "data/manifest.json", "output": "out", "epochs": 3}"#).unwrap();
    let out = meshseg(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochs"));
}
