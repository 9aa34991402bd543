use std::path::Path;
use std::process::{Command, Output};

fn tud(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tud"))
        .args(["--out-dir", dir.to_str().unwrap()])
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = tud(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL: [&str; 6] = ["--n-depressed", "4", "--n-control", "4", "--days", "45"];

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[&["synth", "--seed", "7", "--out", "a.jsonl"][..], &SMALL].concat(),
    );
    ok(
        p,
        &[&["synth", "--seed", "7", "--out", "b.jsonl"][..], &SMALL].concat(),
    );
    ok(
        p,
        &[&["synth", "--seed", "8", "--out", "c.jsonl"][..], &SMALL].concat(),
    );
    let read = |f: &str| std::fs::read(p.join(f)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
}

#[test]
fn features_header_and_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[&["synth", "--seed", "7", "--out", "c.jsonl"][..], &SMALL].concat(),
    );
    let out = ok(
        p,
        &[
            "features", "--mode", "clinical", "--slide", "1", "--in", "c.jsonl",
        ],
    );
    let csv = std::fs::read_to_string(p.join("features.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "user_id,label,episode_start,total_days,active_days,dep_score,level,absence_ratio,mode,slide,is,drfs"
    );
    assert!(csv.lines().skip(1).all(|l| l.contains(",clinical,1,")));

    let echoed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let stored: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("features_run_config.json")).unwrap())
            .unwrap();
    assert_eq!(echoed, stored);
    assert_eq!(echoed["slide"], 1);
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[&["synth", "--seed", "3", "--out", "c.jsonl"][..], &SMALL].concat(),
    );
    ok(
        p,
        &[
            "train", "--in", "c.jsonl", "--epochs", "2", "--hidden", "4", "--no-es",
        ],
    );
    assert!(p.join("model.bin").exists() && p.join("model.bin.json").exists());
    ok(p, &["predict", "--in", "c.jsonl", "--model", "model.bin"]);
    let preds = std::fs::read_to_string(p.join("predictions.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("user_id,label,probability,predicted"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(tud(p, &["synth", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(
        tud(p, &["features", "--in", "c.jsonl", "--slide", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tud(p, &["features", "--in", "missing.jsonl"]).status.code(),
        Some(2)
    );
    assert_eq!(
        tud(p, &["synth", "--out", "../escape.jsonl"]).status.code(),
        Some(1)
    );
    assert_eq!(tud(p, &["--help"]).status.code(), Some(0));
}
