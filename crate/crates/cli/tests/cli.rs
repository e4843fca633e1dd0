use std::path::Path;
use std::process::{Command, Output};

use uncq::data::{gen_sinusoid, load_csv, CategoricalPolicy};

fn uncq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uncq"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("UNCQ_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn lines(p: impl AsRef<Path>) -> Vec<serde_json::Value> {
    String::from_utf8(read(p)).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn missing_dataset_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = uncq(&["pi_eval", "--dataset", "nosuch", "--data-dir", path(dir.path()), "--out", path(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_deviation_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = uncq(&["verify_theorem1", "--t", "--out", path(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&uncq(&["synth", "--bogus"])), 2);
}

#[test]
fn synth_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = uncq(&["synth", "--dataset", "sinusoid", "--n", "40", "--seeds", "3..4", "--out", path(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(a.join("sinusoid.csv")), read(b.join("sinusoid.csv")));

    let back = load_csv(a.join("sinusoid.csv"), "y", CategoricalPolicy::Reject).unwrap();
    let orig = gen_sinusoid(40, 3);
    assert_eq!(back.targets, orig.targets);
    assert_eq!(back.features, orig.features);
}

#[test]
fn synth_with_zero_rows_writes_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = uncq(&["synth", "--dataset", "sinusoid", "--n", "0", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(read(dir.path().join("sinusoid.csv"))).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("x1,"));
}

fn sinusoid_csv(dir: &Path) -> std::path::PathBuf {
    let out = uncq(&["synth", "--dataset", "sinusoid", "--n", "300", "--out", path(&dir.join("data"))]);
    assert_eq!(code(&out), 0);
    dir.join("data/sinusoid.csv")
}

#[test]
fn single_grid_point_gives_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sinusoid_csv(dir.path());
    let out_dir = dir.path().join("pi");
    let out = uncq(&[
        "pi_eval", "--dataset", path(&csv), "--target", "y", "--method", "sqr", "--seeds", "1",
        "--grid-point", "lr=1e-2,wd=0", "--epochs", "5", "--out", path(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(out_dir.join("records.ndjson"));
    assert_eq!(records.len(), 1);
    for key in ["dataset", "method", "seed", "config", "val_picp", "test_picp", "test_mpiw"] {
        assert!(records[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn rerun_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sinusoid_csv(dir.path());
    let first = dir.path().join("first");
    let out = uncq(&[
        "pi_eval", "--dataset", path(&csv), "--target", "y", "--seeds", "2", "--grid", "lr=1e-2:1e-3,wd=0",
        "--epochs", "4", "--jobs", "1", "--out", path(&first),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let second = dir.path().join("second");
    let out = uncq(&["rerun", path(&first.join("manifest.json")), "--out", path(&second), "--jobs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["records.ndjson", "table1.csv", "summary.json"] {
        assert_eq!(read(first.join(file)), read(second.join(file)), "{file}");
    }
}

#[test]
fn manifest_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert_eq!(code(&uncq(&["synth", "--n", "5", "--out", path(&run_dir)])), 0);
    let manifest = run_dir.join("manifest.json");
    let mut doc: serde_json::Value = serde_json::from_slice(&read(&manifest)).unwrap();
    doc["config"]["learning_rate_typo"] = serde_json::json!(0.1);
    std::fs::write(&manifest, serde_json::to_vec(&doc).unwrap()).unwrap();
    assert_eq!(code(&uncq(&["rerun", path(&manifest), "--out", path(&dir.path().join("again"))])), 2);
}

#[test]
fn theorem_check_passes_and_its_self_test_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = uncq(&["verify_theorem1", "--samples", "200000", "--out", path(&dir.path().join("ok"))]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() == 6, "{stdout}");

    let bad = uncq(&["verify_theorem1", "--samples", "200000", "--bound-scale", "0.01", "--out", path(&dir.path().join("bad"))]);
    assert_eq!(code(&bad), 0);
    assert!(String::from_utf8(bad.stdout).unwrap().lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn random_scorer_sits_at_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = uncq(&["synth", "--dataset", "idx", "--n", "2000", "--out", path(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ood = dir.path().join("ood");
    let out = uncq(&[
        "ood_eval", "--dataset", "synth", "--data-dir", path(&data), "--method", "random", "--seeds", "1",
        "--epochs", "1", "--hidden", "16,8", "--out", path(&ood),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records = lines(ood.join("records.ndjson"));
    assert_eq!(records.len(), 1);
    let auc = records[0]["auc"].as_f64().unwrap();
    assert!((auc - 0.5).abs() < 0.05, "{auc}");
}
