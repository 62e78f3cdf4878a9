use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-beam"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_reports_diagnostics_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    let scen = config("near_interferers.kv");
    let out = run(&[
        "solve",
        "-s",
        scen.to_str().unwrap(),
        "--k-max",
        "50",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(text.contains("rho_bound"));
    assert!(text.contains("iterations       50"));
    let rows = fs::read_to_string(trace).unwrap();
    assert_eq!(
        rows.lines().next(),
        Some("k,lagrangian,primal_residual,feasibility_gap")
    );
    assert_eq!(rows.lines().count(), 51);
}

#[test]
fn enumerate_counts_every_subset() {
    let scen = config("wide_interferers.kv");
    let out = run(&["enumerate", "-s", scen.to_str().unwrap(), "--covariance", "true"]);
    let text = stdout(&out);
    assert!(text.contains("evaluated    495"), "{text}");
    assert!(text.contains("best_enum"));
}

#[test]
fn enumerate_cap_is_a_validation_error() {
    let scen = config("wide_interferers.kv");
    let out = bin()
        .args(["enumerate", "-s", scen.to_str().unwrap(), "--cap", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("495"));
}

#[test]
fn select_and_compare_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = config("wide_interferers.kv");
    let sel = tmp.path().join("sel.csv");
    run(&[
        "select",
        "-s",
        scen.to_str().unwrap(),
        "--k-max",
        "300",
        "--out",
        sel.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&sel).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("admm,"));
    assert_eq!(row.split(',').nth(1).unwrap().split(';').count(), 4);

    let cmp = tmp.path().join("cmp.csv");
    let out = run(&[
        "compare",
        "-s",
        scen.to_str().unwrap(),
        "--covariance",
        "true",
        "--methods",
        "whole_ula,nested,coprime",
        "--out",
        cmp.to_str().unwrap(),
    ]);
    let first = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(first.starts_with("whole_ula"), "{first}");
    let csv = fs::read_to_string(cmp).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn pattern_covers_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = config("wide_interferers.kv");
    let out = tmp.path().join("bp.csv");
    run(&[
        "pattern",
        "-s",
        scen.to_str().unwrap(),
        "--method",
        "nested",
        "--grid",
        "-90:1:90",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().count(), 182);
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = config("sparsity_sweep.kv");
    let dir = tmp.path().join("sweep");
    let out = run(&[
        "--threads",
        "2",
        "sweep",
        exp.to_str().unwrap(),
        "--output-dir",
        dir.to_str().unwrap(),
        "--trials",
        "2",
    ]);
    assert!(stdout(&out).starts_with("12 jobs"));
    assert!(dir.join("sparsity_vs_lambda.csv").exists());
    let manifest = fs::read_to_string(dir.join("manifest.kv")).unwrap();
    assert!(manifest.contains("trials = 2"), "{manifest}");
}

#[test]
fn bad_config_exits_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.kv");
    fs::write(&bad, "m = 8\nsoi_doa_deg = 0\nsnr_db = 0\ncolour = blue\n").unwrap();
    let out = bin().args(["solve", "-s", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let missing = bin().args(["solve", "-s", "/nonexistent/x.kv"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
