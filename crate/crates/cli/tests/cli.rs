use std::path::Path;
use std::process::{Command, Output};

fn posegrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posegrid")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = posegrid(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json(path: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_encode_decode_eval_render() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, fhm, dets, report, ppm) = (
        path(dir.path(), "scene.json"),
        path(dir.path(), "gt.fhm"),
        path(dir.path(), "dets.json"),
        path(dir.path(), "eval.json"),
        path(dir.path(), "overlay.ppm"),
    );
    ok(&["gen", "--seed", "4", "--persons", "2", "--out", &scene]);
    assert_eq!(json(&scene)["poses"].as_array().unwrap().len(), 2);

    ok(&["encode", "--poses", &scene, "--out", &fhm]);
    let bytes = std::fs::read(&fhm).unwrap();
    assert_eq!(&bytes[..4], b"FHM1");
    assert_eq!(bytes.len(), 20 + 4 * 36 * 96 * 96);

    ok(&["decode", "--heatmap", &fhm, "--out", &dets]);
    let poses = json(&dets);
    assert_eq!(poses.as_array().unwrap().len(), 2);
    assert_eq!(poses[0]["keypoints"].as_array().unwrap().len(), 17);
    assert_eq!(poses[0]["keypoints"][0].as_array().unwrap().len(), 3);
    assert!(poses[0]["score"].is_number());

    let top = ok(&["decode", "--heatmap", &fhm, "--top", "1"]);
    let top: serde_json::Value = serde_json::from_slice(&top.stdout).unwrap();
    assert_eq!(top.as_array().unwrap().len(), 1);

    ok(&["eval", "--detections", &dets, "--ground-truth", &scene, "--out", &report]);
    let r = json(&report);
    assert_eq!(r["AP"], 1.0);
    assert_eq!(r["AR"], 1.0);
    assert_eq!(r["per_threshold"].as_array().unwrap().len(), 10);

    ok(&["render", "--poses", &dets, "--heatmap", &fhm, "--out", &ppm]);
    let img = std::fs::read(&ppm).unwrap();
    assert!(img.starts_with(b"P6\n384 384\n255\n"));
    assert_eq!(img.len(), 15 + 384 * 384 * 3);
}

#[test]
fn same_seed_same_output() {
    let a = ok(&["gen", "--seed", "11"]).stdout;
    let b = ok(&["gen", "--seed", "11"]).stdout;
    let c = ok(&["gen", "--seed", "12"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn loss_check_report() {
    let out = ok(&["loss-check", "--seed", "3"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["loss"].as_f64().unwrap() > 0.0);
    assert!(r["max_grad_rel_err"].as_f64().unwrap() < 1e-4);
    assert!(r["pixels_checked"].as_u64().unwrap() > 0);
}

#[test]
fn roundtrip_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    std::fs::write(&cfg, r#"{"harness":{"min_persons":1,"max_persons":2}}"#).unwrap();
    let out = ok(&["roundtrip", "--config", &cfg, "--scenes", "6", "--seed", "2"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["scenes"], 6);
    assert_eq!(r["exact_count_scenes"], 6);
    assert!(r.get("timings").is_none());
    let w1 = ok(&["roundtrip", "--config", &cfg, "--scenes", "6", "--seed", "2", "--workers", "1"]).stdout;
    assert_eq!(w1, out.stdout);
    let timed = ok(&["roundtrip", "--scenes", "2", "--timings"]);
    let r: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(r["timings"]["decode_ms"].is_number());
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "bad.json");
    std::fs::write(&cfg, r#"{"loss":{"alpha":0.01}}"#).unwrap();
    assert_eq!(posegrid(&["gen", "--config", &cfg]).status.code(), Some(1));

    let garbage = path(dir.path(), "garbage.fhm");
    std::fs::write(&garbage, b"FHM2 not a heatmap").unwrap();
    assert_eq!(posegrid(&["decode", "--heatmap", &garbage]).status.code(), Some(1));

    assert_eq!(posegrid(&["gen", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(posegrid(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.fhm");
    let out = posegrid(&["decode", "--heatmap", &missing]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.fhm"));
    let unwritable = path(&dir.path().join("no_such_dir"), "scene.json");
    assert_eq!(posegrid(&["gen", "--out", &unwritable]).status.code(), Some(2));
}
