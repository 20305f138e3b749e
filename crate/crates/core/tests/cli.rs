//! End-to-end behaviour of the `bruhat` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bruhat::cli::{read_estimates, sha256_hex, RunManifest};

fn bruhat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bruhat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn exact_prints_rational_probability() {
    let v = json(&bruhat(&["exact", "--n", "3"]));
    assert_eq!(v["probability"], "19/36");
    assert_eq!(v["comparable_pairs"], 19);
    assert_eq!(v["total_pairs"], 36);
    assert_eq!(bruhat(&["exact", "--n", "8"]).status.code(), Some(2));
}

#[test]
fn lishao_reports_exact_closed_form() {
    let v = json(&bruhat(&["lishao", "--rho", "400"]));
    assert_eq!(v["closed_form_exact"], "441/361");
    assert_eq!(v["bound_satisfied"], true);
}

#[test]
fn check_and_zmin_report_witness() {
    let v = json(&bruhat(&["check", "--pi", "1 3 2", "--tau", "3 2 1"]));
    assert_eq!(v["leq"], true);
    assert!(v["witness"].is_null());
    let v = json(&bruhat(&["check", "--pi", "2 1 3", "--tau", "1 3 2"]));
    assert_eq!(v["leq"], false);
    assert_eq!(v["witness"], serde_json::json!([1, 1]));
    let v = json(&bruhat(&["check", "--pi", "2 1 3", "--tau", "1 3 2", "--order", "weak"]));
    assert_eq!(v["leq"], false);
    let v = json(&bruhat(&["zmin", "--pi", "2 1 3", "--tau", "1 3 2"]));
    assert_eq!(v["min"], -1);
    assert_eq!(bruhat(&["check", "--pi", "1 1 2", "--tau", "1 2 3"]).status.code(), Some(2));
}

#[test]
fn hyper_and_bernratio_emit_exact_strings() {
    let v = json(&bruhat(&["hyper", "--N", "100", "--B", "30", "--A", "20", "--moments"]));
    assert_eq!(v["mean"], "6");
    assert_eq!(v["variance"], "112/33");
    let v = json(&bruhat(&["hyper", "--N", "10", "--B", "3", "--A", "4", "--k", "2"]));
    assert_eq!(v["pmf"], "3/10");
    let v = json(&bruhat(&["bernratio", "--n", "10000"]));
    assert_eq!(v["side"], 215);
    assert_eq!(v["ratios"].as_array().unwrap().len(), 7);
}

#[test]
fn invalid_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n_grid = [8, 4]\n").unwrap();
    let out = bruhat(&["--config", cfg.to_str().unwrap(), "mc", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, "n_grd = [4, 8]\n").unwrap();
    let out = bruhat(&["--config", cfg.to_str().unwrap(), "mc", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn large_n_is_refused_without_force() {
    let out = bruhat(&["mc", "--n", "8,100", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(4));
    let out = bruhat(&["--force", "mc", "--n", "8,100", "--trials", "10"]);
    assert!(out.status.success());
}

#[test]
fn config_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 3\nn_grid = [4, 5]\ntrials = 100\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = bruhat(&["--config", cfg.to_str().unwrap(), "mc", "--n", "6", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = read_estimates(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].n, rows[0].trials, rows[0].seed), (6, 100, 3));
}

fn run_pipeline(dir: &Path, workers: &str) {
    let o = bruhat(&[
        "--workers",
        workers,
        "pipeline-scaling",
        "--n",
        "4,6,8,12,16",
        "--trials",
        "200000",
        "--seed",
        "17",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn pipeline_is_reproducible_and_manifested() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&a, "1");
    run_pipeline(&b, "4");
    for f in ["results.csv", "fit.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: RunManifest = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 17);
    assert_eq!(manifest.workers, 1);
    for (path, digest) in &manifest.outputs {
        assert_eq!(&sha256_hex(&fs::read(path).unwrap()), digest);
    }
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(a.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["status"], "ok");
    assert!(fit["fit"]["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn mc_then_fit_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("results.csv");
    let fit = tmp.path().join("fit.json");
    let o = bruhat(&["mc", "--n", "4,8,16", "--trials", "50000", "--seed", "2", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(tmp.path().join("results.csv.manifest.json").exists());
    let o = bruhat(&["fit", "--input", csv.to_str().unwrap(), "--out", fit.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&fit).unwrap()).unwrap();
    assert_eq!(v["status"], "UNDERDETERMINED");
    // A file under another schema is rejected.
    let text = fs::read_to_string(&csv).unwrap().replacen("mc/1", "mc/0", 1);
    fs::write(&csv, text).unwrap();
    let o = bruhat(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gauss_and_chainstat_write_versioned_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("sheet.csv");
    let o = bruhat(&[
        "gauss", "--grid", "4,8,16", "--threshold", "1", "--trials", "20000", "--seed", "3", "--mode", "zeta", "--p",
        "0.5", "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("#schema=sheet/1"));
    assert!(text.lines().next().unwrap().contains("matched-variance"));
    assert_eq!(text.lines().count(), 5);
    let o = bruhat(&["chainstat", "--n", "128", "--x", "16", "--y", "32", "--trials", "200", "--seed", "1"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().nth(1).unwrap().starts_with("n,x,y,statistic,estimate,stderr,normalizer"));
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn fkg_prints_table() {
    let o = bruhat(&["fkg", "--n", "4", "--pairs", "30", "--seed", "1"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("corner events equal"));
    assert!(!out.contains("FAIL"));
    assert!(out.contains("extremal pair"));
}
