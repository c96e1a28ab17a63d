use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vark(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vark"))
        .current_dir(dir)
        .env_remove("VARK_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, name: &str, students: &str, seed: &str) {
    stdout(&vark(dir, &["--seed", seed, "synth", "--students", students, "-o", name]));
}

const FAST_EVAL: &[&str] = &["--cv", "kfold", "--folds", "5", "--models", "knn,dt,rf", "--param", "rf.n_trees=10"];

#[test]
fn nominate_orders_by_probability_within_threshold() {
    let dir = TempDir::new().unwrap();
    let run = |t: &str| stdout(&vark(dir.path(), &["nominate", "--probs", "0.3,0.22,0.08,0.4", "--threshold", t]));
    assert_eq!(run("0.2").trim(), "R,A,V");
    assert_eq!(run("0.1").trim(), "R,A");
    assert_eq!(run("1.0").trim(), "R,A,V,K");
}

#[test]
fn nominate_json_lists_styles() {
    let dir = TempDir::new().unwrap();
    let out = stdout(&vark(dir.path(), &["nominate", "--probs", "0.3,0.22,0.08,0.4", "--json"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["styles"][0], "R");
}

#[test]
fn synth_is_reproducible_and_writes_manifest() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "a.csv", "15", "9");
    synth(dir.path(), "b.csv", "15", "9");
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 16);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["output_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn synth_without_multi_select_gives_single_letters() {
    let dir = TempDir::new().unwrap();
    stdout(&vark(dir.path(), &["--seed", "7", "synth", "--students", "10", "--rate", "0", "-o", "s.csv"]));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    for line in text.lines().skip(1) {
        for cell in line.split(',').skip(1) {
            assert_eq!(cell.len(), 1, "{line}");
        }
    }
}

#[test]
fn invalid_arguments_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    assert_eq!(vark(dir.path(), &["synth", "--students", "1", "-o", "x.csv"]).status.code(), Some(2));
    assert_eq!(vark(dir.path(), &["nominate", "--probs", "0.5,0.5"]).status.code(), Some(2));
    assert_eq!(vark(dir.path(), &["bogus"]).status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn malformed_or_missing_input_exits_with_data_code() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "garbage\n").unwrap();
    let out = vark(dir.path(), &["describe", "-i", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
    assert_eq!(vark(dir.path(), &["eval", "-i", "missing.csv"]).status.code(), Some(3));
}

#[test]
fn too_small_cohort_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "5", "1");
    assert_eq!(vark(dir.path(), &["eval", "-i", "d.csv"]).status.code(), Some(3));
}

#[test]
fn eval_regression_report_shape_and_reruns_are_identical() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "20", "3");
    let mut args = vec!["--out-dir", "r1", "eval", "-i", "d.csv", "--mode", "regression"];
    args.extend_from_slice(FAST_EVAL);
    let printed = stdout(&vark(dir.path(), &args));
    assert!(printed.contains("MAE"));
    args[1] = "r2";
    args.push("--sequential");
    stdout(&vark(dir.path(), &args));

    let first = fs::read(dir.path().join("r1/report.json")).unwrap();
    assert_eq!(first, fs::read(dir.path().join("r2/report.json")).unwrap());

    let report: Value = serde_json::from_slice(&first).unwrap();
    assert!(report["classification"].is_null());
    let regression = &report["regression"];
    assert_eq!(regression["n_students"], 20);
    let models = regression["models"].as_array().unwrap();
    assert_eq!(models.len(), 3);
    for m in models {
        let residuals = m["residuals"].as_array().unwrap();
        assert_eq!(residuals.len(), 4);
        assert!(residuals.iter().all(|r| r.as_array().unwrap().len() == 20));
    }
    assert_eq!(report["manifest"]["flags"]["mode"], "regression");
}

#[test]
fn csv_output_has_manifest_headers_and_classification_tables() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "20", "3");
    let mut args = vec!["--out-dir", "out", "--format", "csv", "--plots", "eval", "-i", "d.csv"];
    args.extend_from_slice(FAST_EVAL);
    stdout(&vark(dir.path(), &args));
    let out = dir.path().join("out");
    for name in ["regression.csv", "wilcoxon.csv", "confusion.csv", "roc.csv", "classification_A.csv", "classification_R.csv"]
    {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# manifest: {"), "{name}");
    }
    let svgs = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "svg").count();
    assert!(svgs > 0);
}

#[test]
fn describe_counts_every_student() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "12", "4");
    stdout(&vark(dir.path(), &["--out-dir", "o", "describe", "-i", "d.csv"]));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/describe.json")).unwrap()).unwrap();
    assert_eq!(report["descriptive"]["n_students"], 12);
}

#[test]
fn trained_bundle_feeds_nomination() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "d.csv", "20", "5");
    stdout(&vark(dir.path(), &["train", "-i", "d.csv", "--algorithm", "dt", "-o", "m.json"]));
    let answers = "V,V,V,V,V,V,V,V,A,A,K,K,R,V,V,V";
    let out = stdout(&vark(dir.path(), &["nominate", "--model", "m.json", "--answers", answers, "--json"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let styles = v["styles"].as_array().unwrap();
    assert!(!styles.is_empty() && styles.len() <= 4);

    stdout(&vark(dir.path(), &["train", "-i", "d.csv", "--algorithm", "knn", "--mode", "classification", "-o", "c.json"]));
    let out = vark(dir.path(), &["nominate", "--model", "c.json", "--answers", answers]);
    assert_eq!(out.status.code(), Some(2));
}
