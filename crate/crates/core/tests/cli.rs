use std::path::Path;
use std::process::{Command, Output};

use worldkit::geometry::{DepthMap, RgbImage};
use worldkit::io::{read_bytes, write_depth, write_png};

fn worldkit(args: &[&str], cwd: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_worldkit"));
    cmd.args(args).current_dir(cwd);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = worldkit(args, cwd, &[]);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn manifests(root: &Path, dirs: &[&str]) -> Vec<Vec<u8>> {
    dirs.iter()
        .map(|d| read_bytes(&root.join(d).join("manifest.json")).unwrap())
        .collect()
}

fn pipeline(root: &Path, threads: &str) {
    ok(
        &["--seed", "3", "synth-scene", "--kind", "box_room", "--out", "s"],
        root,
    );
    ok(
        &["--seed", "3", "--threads", threads, "parse-scene", "s", "--out", "p"],
        root,
    );
    ok(&["--seed", "3", "--threads", threads, "plan", "p", "--out", "t"], root);
    ok(
        &[
            "--seed",
            "3",
            "synth-scene",
            "--kind",
            "box_room",
            "--frames-from",
            "t/trajectories.json",
            "--out",
            "f",
        ],
        root,
    );
    ok(
        &["--seed", "3", "--threads", threads, "align", "p", "f", "--out", "a"],
        root,
    );
    ok(
        &["--seed", "3", "--threads", threads, "compose", "a", "--out", "c"],
        root,
    );
}

#[test]
fn pipeline_is_deterministic_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), "1");
    pipeline(b.path(), "4");
    let dirs = ["s", "p", "t", "f", "a", "c"];
    assert_eq!(manifests(a.path(), &dirs), manifests(b.path(), &dirs));
    let metrics = String::from_utf8(read_bytes(&a.path().join("c/metrics.json")).unwrap()).unwrap();
    assert!(metrics.contains("mean_photometric"));
}

#[test]
fn missing_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = worldkit(&["plan", "empty"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse-scene"), "{err}");
}

#[test]
fn non_two_to_one_panorama_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth-scene", "--kind", "box_room", "--out", "s"], dir.path());
    let s = dir.path().join("s");
    write_depth(&s.join("depth.hwdm"), &DepthMap::from_fn(100, 60, |_, _| Some(2.0))).unwrap();
    write_png(&s.join("panorama.png"), &RgbImage::filled(100, 60, [0.5; 3])).unwrap();
    std::fs::remove_file(s.join("sky.png")).unwrap();
    let out = worldkit(&["parse-scene", "s", "--out", "p"], dir.path(), &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2:1"), "{err}");
}

#[test]
fn corrupted_sequence_is_discarded() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&["synth-scene", "--kind", "box_room", "--out", "s"], root);
    ok(&["parse-scene", "s", "--out", "p"], root);
    ok(&["plan", "p", "--out", "t"], root);
    ok(
        &[
            "synth-scene",
            "--kind",
            "box_room",
            "--frames-from",
            "t/trajectories.json",
            "--corrupt-sequence",
            "2",
            "--out",
            "f",
        ],
        root,
    );
    let out = worldkit(
        &["align", "p", "f", "--out", "a"],
        root,
        &[("HYG_REVISION__PERCENTILE", "50")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&read_bytes(&root.join("a/report.json")).unwrap()).unwrap();
    for c in report.as_array().unwrap() {
        let corrupted = c["sequence"] == 2;
        assert_eq!(c["discarded_sequence"].as_bool().unwrap(), corrupted, "{c}");
    }
    assert!(!root.join("a/aligned/0008_depth.hwdm").exists());
}

#[test]
fn config_file_and_environment_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("cfg.toml"), "[planner.caps]\ntotal = 2\n").unwrap();
    ok(&["synth-scene", "--kind", "box_room", "--out", "s"], root);
    ok(&["parse-scene", "s", "--out", "p"], root);
    let table = ok(&["--config", "cfg.toml", "plan", "p", "--out", "t"], root);
    assert!(
        table
            .lines()
            .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", "2", "2"]),
        "{table}"
    );
    let out = worldkit(
        &["--config", "cfg.toml", "plan", "p", "--out", "t2"],
        root,
        &[("HYG_PLANNER__CAPS__TOTAL", "1")],
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(
        table
            .lines()
            .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", "1", "1"]),
        "{table}"
    );
    std::fs::write(root.join("bad.toml"), "[planner]\nmax_step = -1.0\n").unwrap();
    assert!(
        !worldkit(&["--config", "bad.toml", "plan", "p", "--out", "t3"], root, &[])
            .status
            .success()
    );
}

#[test]
fn utilities_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    ok(&["utils", "rope-analysis", "--sizes", "8,16,32", "--out", "r"], root);
    let csv = String::from_utf8(read_bytes(&root.join("r/rope_similarity.csv")).unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv.starts_with("size_a,size_b,normalized,absolute"));

    std::fs::write(
        root.join("req.json"),
        r#"{"max_tokens": 1000, "samples": [{"id": "a", "tokens": 600}, {"id": "b", "tokens": 400}, {"id": "c", "tokens": 700}]}"#,
    )
    .unwrap();
    ok(&["utils", "pack", "req.json", "--out", "k"], root);
    let bins: serde_json::Value = serde_json::from_slice(&read_bytes(&root.join("k/bins.json")).unwrap()).unwrap();
    let bins = bins["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 2);
    assert!(bins.iter().all(|b| b["tokens"].as_u64().unwrap() <= 1000));

    std::fs::write(
        root.join("big.json"),
        r#"{"max_tokens": 10, "samples": [{"id": "a", "tokens": 11}]}"#,
    )
    .unwrap();
    assert_eq!(
        worldkit(&["utils", "pack", "big.json", "--out", "k2"], root, &[])
            .status
            .code(),
        Some(2)
    );
}
