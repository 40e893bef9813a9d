use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sumie(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumie")).current_dir(dir).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sumie(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn verbs_drive_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["teapot", "teapot.obj"]);
    ok(dir, &["ingest", "teapot.obj", "tp.json"]);
    for verb in ["contours", "simplify", "vectorize", "optimize", "map", "styles", "compile", "simulate"] {
        ok(dir, &[verb, "tp.json"]);
    }
    assert!(dir.join("tp.artifacts/canvas.png").exists());

    let status: Value = serde_json::from_str(&ok(dir, &["status", "tp.json"])).unwrap();
    assert!(status["stages"].as_object().unwrap().values().all(|v| v == "fresh"), "{status}");
    let rev = status["revision"].as_u64().unwrap();

    let out: Value = serde_json::from_str(&ok(dir, &["edit", "tp.json", "--op", r#"{"op":"resplit","mu":300}"#])).unwrap();
    assert_eq!(out["revision"].as_u64(), Some(rev + 1));

    let failed = sumie(dir, &["compile", "tp.json"]);
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("rerun optimize"));

    let stale = sumie(dir, &["edit", "tp.json", "--revision", &rev.to_string(), "--undo"]);
    assert!(!stale.status.success());
    assert!(String::from_utf8_lossy(&stale.stderr).contains("conflict"));

    ok(dir, &["run-all", "tp.json"]);
    let status: Value = serde_json::from_str(&ok(dir, &["status", "tp.json"])).unwrap();
    assert!(status["stages"].as_object().unwrap().values().all(|v| v == "fresh"), "{status}");
}

#[test]
fn report_has_angles_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["teapot", "teapot.obj"]);
    ok(dir, &["ingest", "teapot.obj", "tp.json"]);
    ok(dir, &["report", "tp.json", "-o", "report.json"]);
    let r: Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    let descents = r["angles"]["descents"].as_array().unwrap();
    assert_eq!(descents.len(), 5);
    for d in descents {
        assert_eq!(d["optimized"]["theta"].as_array().unwrap().len(), 6, "{d}");
    }
    assert_eq!(r["sweep"]["points"].as_array().unwrap().len(), 12);
    assert!(r["canvasSha256"].is_null());
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.obj"), "v 0 0\nf 1 2 3\n").unwrap();
    assert!(!sumie(dir, &["ingest", "bad.obj", "x.json"]).status.success());
    assert!(!dir.join("x.json").exists());
    assert!(!sumie(dir, &["status", "missing.json"]).status.success());
}
