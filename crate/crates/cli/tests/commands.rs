//! Runs the `mss` binary end to end.

use std::path::{Path, PathBuf};
use std::process::Command;

fn mss() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mss"));
    cmd.env("MSS_LOG", "warn");
    cmd
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tiny/build.toml")
}

fn manifest_files(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str::<serde_json::Value>(&text).unwrap()["files"].clone()
}

#[test]
fn build_twice_gives_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = mss()
            .args(["build", "--config"])
            .arg(fixture())
            .arg("--output")
            .arg(out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    assert_eq!(manifest_files(&a), manifest_files(&b));
    let counts = &serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(a.join("manifest.json")).unwrap())
        .unwrap()["counts"];
    assert_eq!(counts["intervals"], 23);
    assert_eq!(counts["embedded_snapshots"], 15);
    assert_eq!(counts["embedding_records"], 45);
}

#[test]
fn env_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kk");
    let status = mss()
        .args(["build", "--config"])
        .arg(fixture())
        .env("MSS_OUTPUT", &out)
        .env("MSS_LAYOUT", "kk")
        .env("MSS_SEED", "7")
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let layout: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("layout.json")).unwrap()).unwrap();
    assert_eq!(layout["algorithm"], "kamada_kawai");
    assert_eq!(layout["seed"], 7);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = mss()
        .args(["build", "--config"])
        .arg(fixture())
        .arg("--input")
        .arg(dir.path().join("missing.tsv"))
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("missing.tsv"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "input = \"x.tsv\"\nbucket_width = 0\n").unwrap();
    let status = mss().args(["build", "--config"]).arg(&cfg).output().unwrap().status;
    assert!(!status.success());
    let status = mss().args(["eval", "--config"]).arg(&cfg).args(["--out", "x.csv"]).output().unwrap().status;
    assert!(!status.success());
}

#[test]
fn eval_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eval.toml");
    std::fs::write(
        &cfg,
        "methods = [\"fgsd\", \"multiscale_fgsd\", \"random\"]\n\
         [sbm]\nnodes = 30\ntimesteps = 16\ndiminish_len = 4\n\
         [experiment]\nlengths = [1, 2]\nruns = 2\nk = 3\n",
    )
    .unwrap();
    let out = dir.path().join("table.csv");
    let output = mss()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,L1,L2");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        for cell in line.split(',').skip(1) {
            let v: f64 = cell.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert!(String::from_utf8_lossy(&output.stdout).contains("chance L=1"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let eval = mss_cli::EvalConfig::load(&root.join("eval.toml")).unwrap();
    assert_eq!(eval.methods.len(), 7);
    assert_eq!(eval.experiment.doc.epochs, 250);
    assert_eq!(eval.sbm, mss_core::oracle::SbmConfig::default());
    let build = mss_core::config::BuildConfig::load(&root.join("reddit.toml")).unwrap();
    assert_eq!(build.embedding.doc.epochs, 80);
    assert!(build.schema.has_header);
}
