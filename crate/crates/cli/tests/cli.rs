//! Command-line behaviour: outputs, exit codes and error lines.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmforge_core::mesh_motion::procedural::{walker, WalkerParams};
use mmforge_core::mesh_motion::save_mesh_sequence;
use serde_json::Value;

fn mmforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmforge")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn error_line(o: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let last = stderr.lines().last().expect("stderr is empty");
    serde_json::from_str(last).unwrap_or_else(|_| panic!("not JSON: {last}"))
}

fn motion(dir: &Path) -> std::path::PathBuf {
    let seq = walker(&WalkerParams {
        duration_s: 0.4,
        around: 6,
        along: 2,
        ..Default::default()
    })
    .unwrap();
    save_mesh_sequence(&seq, dir.join("walk")).unwrap()
}

#[test]
fn synth_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = motion(dir.path());
    let out = dir.path().join("out");
    let o = mmforge(&["synth", "--motion", p(&m), "--seed", "3", "--out", p(&out), "--cube"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["frames"], 20);
    assert_eq!(summary["doppler_bins"], 128);
    for f in ["spectrogram.f32", "spectrogram.json", "plan.json", "spectrogram.png", "cube.f32", "cube.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let o = mmforge(&["inspect", p(&out.join("spectrogram.f32"))]);
    assert!(o.status.success());
    let side: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((side["H"].as_u64(), side["W"].as_u64()), (Some(20), Some(128)));
    assert_eq!(side["provenance"]["plan_seed"], 3);

    let o = mmforge(&["inspect", p(&out.join("cube.f32"))]);
    let side: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(side["samples"], 256);

    // The directory form of --motion and the seed both matter.
    let again = dir.path().join("again");
    let o = mmforge(&["synth", "--motion", p(m.parent().unwrap()), "--seed", "3", "--out", p(&again)]);
    assert!(o.status.success());
    assert_eq!(fs::read(out.join("spectrogram.f32")).unwrap(), fs::read(again.join("spectrogram.f32")).unwrap());
    assert!(!again.join("cube.f32").exists());
}

#[test]
fn plot_renders_png() {
    let dir = tempfile::tempdir().unwrap();
    let m = motion(dir.path());
    let out = dir.path().join("out");
    assert!(mmforge(&["synth", "--motion", p(&m), "--out", p(&out)]).status.success());
    let png = dir.path().join("gray.png");
    let o = mmforge(&["plot", p(&out.join("spectrogram.f32")), "--png", p(&png), "--colormap", "gray"]);
    assert!(o.status.success());
    let bytes = fs::read(&png).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    // IHDR width and height, big endian: Doppler across, time down.
    assert_eq!(u32::from_be_bytes(bytes[16..20].try_into().unwrap()), 128);
    assert_eq!(u32::from_be_bytes(bytes[20..24].try_into().unwrap()), 20);
}

#[test]
fn dataset_build_and_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let m = motion(dir.path());
    let rel = m.strip_prefix(dir.path()).unwrap().to_str().unwrap().to_string();
    let spec = serde_json::json!({"entries": [
        {"id": "ok", "prompt": "A person walks.", "motion": rel},
        {"id": "missing", "prompt": "A person runs.", "motion": "nope/motion.json"},
    ]});
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let out = dir.path().join("ds");
    let o = mmforge(&["dataset", "build", p(&spec_path), "--out", p(&out), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let err = error_line(&o);
    assert_eq!(err["error"], "entries_failed");
    assert!(err["message"].as_str().unwrap().contains("missing"));

    let o = mmforge(&["inspect", p(&out.join("manifest.jsonl"))]);
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["entries"], 1);
    assert_eq!(summary["errors"][0]["kind"], "io");

    let o = mmforge(&["dataset", "build", p(&spec_path), "--out", p(&dir.path().join("ff")), "--fail-fast"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "entry");
    assert!(!dir.path().join("ff/manifest.jsonl").exists());
}

#[test]
fn prompts_are_json_lines() {
    let o = mmforge(&["prompts", "--scenario", "office: sit down, wave", "--style", "template", "--count", "2"]);
    assert!(o.status.success());
    let lines: Vec<Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l["provenance"] == "grammar"));
    let again = mmforge(&["prompts", "--scenario", "office: sit down, wave", "--style", "template", "--count", "2"]);
    assert_eq!(lines.len(), String::from_utf8(again.stdout).unwrap().lines().count());
}

#[test]
fn failures_are_machine_readable() {
    let o = mmforge(&["synth", "--motion", "/nonexistent/motion.json", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
    let err = error_line(&o);
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("/nonexistent/motion.json"));

    let o = mmforge(&["prompts", "--scenario", "x", "--style", "fancy"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "usage");

    let o = mmforge(&["prompts", "--scenario", "zoo: juggle", "--count", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "uncovered_lemma");

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.f32");
    fs::write(&f, [0u8; 12]).unwrap();
    fs::write(dir.path().join("s.json"), r#"{"format_version":1,"H":2,"W":2}"#).unwrap();
    let o = mmforge(&["inspect", p(&f)]);
    assert_eq!(error_line(&o)["error"], "size_mismatch");

    assert!(mmforge(&["--help"]).status.success());
}
