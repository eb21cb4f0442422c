use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "seed": 3,
  "data": {"synthetic": {"n_patients": 400}},
  "model": {
    "schedule": {"pretrain_epochs": 5, "transfer_epochs": 3, "cluster_epochs": 10},
    "forest": {"n_trees": 20}
  },
  "enrichment": {"depth": 2}
}"#;

fn dsec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsec"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env("DSEC_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dsec(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(dir: &Path, args: &[&str]) -> String {
    let out = dsec(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn small_run(dir: &Path) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    let c = cfg.to_str().unwrap();
    ok(dir, &["--config", c, "synth"]);
    ok(dir, &["preprocess"]);
    ok(dir, &["train", "--method", "dsec"]);
    ok(dir, &["evaluate"]);
    ok(dir, &["embed"]);
    ok(dir, &["cluster"]);
    ok(dir, &["enrich"]);
}

#[test]
fn stages_name_the_missing_prerequisite() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    assert!(err(d, &["--config", cfg.to_str().unwrap(), "preprocess"]).contains("run `synth` first"));
    ok(d, &["--config", cfg.to_str().unwrap(), "synth"]);
    assert!(err(d, &["train", "--method", "dsec"]).contains("run `preprocess` first"));
    ok(d, &["preprocess"]);
    assert!(err(d, &["evaluate"]).contains("run `train` first"));
    assert!(err(d, &["embed"]).contains("run `train --method dsec` first"));
    assert!(err(d, &["cluster", "--method", "dec"]).contains("run `embed --method dec` first"));
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);
    let report = ok(d, &["report"]);
    assert!(report.contains("Held-out AUC"));
    for name in [
        "manifest.json",
        "admissions.csv",
        "preprocessed.csv",
        "split.json",
        "model_dsec.json",
        "model_dec.json",
        "metrics.json",
        "roc.svg",
        "embedding_dsec.csv",
        "embedding_dsec.svg",
        "linkage_dsec.csv",
        "enrichment_dsec.csv",
        "report.md",
    ] {
        assert!(d.join(name).exists(), "{name}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    for key in ["auc_dsec", "auc_dec_rf", "auc_pca_rf"] {
        let auc = metrics[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc), "{key}");
    }
    let fp = metrics["fingerprint"].as_str().unwrap().to_string();
    let embedding = fs::read_to_string(d.join("embedding_dsec.csv")).unwrap();
    let mut lines = embedding.lines();
    assert_eq!(lines.next().unwrap(), format!("# dsec fingerprint={fp} seed=3"));
    assert_eq!(lines.next().unwrap(), "patient_id,z1,z2,z3,label");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["fingerprint"], fp.as_str());
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn report_refuses_mixed_fingerprints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_run(d);
    assert!(err(d, &["--seed", "4", "report"]).contains("refusing"));

    let path = d.join("metrics.json");
    let text = fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["fingerprint"] = "0".repeat(64).into();
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let msg = err(d, &["report"]);
    assert!(msg.contains("metrics.json"), "{msg}");
}

#[test]
fn bad_configs_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("bad.json");
    fs::write(&cfg, r#"{"model": {"k": 1}, "enrichment": {"alpha": 3.0}}"#).unwrap();
    let msg = err(d, &["--config", cfg.to_str().unwrap(), "synth"]);
    assert!(msg.contains("model.k") && msg.contains("enrichment.alpha"), "{msg}");
    fs::write(&cfg, r#"{"modle": {}}"#).unwrap();
    assert!(err(d, &["--config", cfg.to_str().unwrap(), "synth"]).contains("unknown field"));
    assert!(err(d, &["--depth", "0", "synth"]).contains("enrichment.depth"));
}

#[test]
fn flags_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    ok(
        d,
        &["--config", cfg.to_str().unwrap(), "--seed", "11", "--k", "3", "synth"],
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["model"]["k"], 3);
    assert_eq!(manifest["config"]["data"]["synthetic"]["n_patients"], 400);
}

#[test]
fn quick_selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["selftest", "--quick"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{out}");
}
