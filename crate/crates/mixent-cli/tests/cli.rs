//! End-to-end tests of the command-line interface: exit codes, JSON shapes,
//! and the synth -> mi round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixent"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixent-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn json_of(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn entropy_taylor_on_single_gaussian_fixture() {
    let dir = tmp_dir("entropy");
    let gmm = dir.join("single.json");
    write(
        &gmm,
        r#"{"components":[{"weight":1.0,"mean":[0.0],"cov":[[1.0]]}]}"#,
    );
    let out = bin()
        .args(["entropy"])
        .arg(&gmm)
        .args(["--method", "taylor", "--order", "2"])
        .output()
        .unwrap();
    let v = json_of(&out);
    let nats = v["entropy_nats"].as_f64().unwrap();
    assert!((nats - 1.4189385332).abs() < 1e-9);
    assert_eq!(v["method"], "taylor");
    assert_eq!(v["order"], 2);
}

#[test]
fn entropy_quadrature_on_two_component_fixture() {
    let dir = tmp_dir("quad");
    let gmm = dir.join("fig7p0.json");
    write(
        &gmm,
        r#"{"components":[
            {"weight":0.5,"mean":[0.0,0.0],"cov":[[4.0,2.0],[2.0,4.0]]},
            {"weight":0.5,"mean":[0.0,0.0],"cov":[[5.0,2.0],[2.0,5.0]]}]}"#,
    );
    let out = bin()
        .args(["entropy"])
        .arg(&gmm)
        .args(["--method", "quadrature"])
        .output()
        .unwrap();
    let v = json_of(&out);
    let nats = v["entropy_nats"].as_f64().unwrap();
    // frozen oracle value for this mixture
    assert!((nats - 4.2316149).abs() < 1e-5, "got {nats}");
}

#[test]
fn entropy_rejects_malformed_json_with_exit_2() {
    let dir = tmp_dir("badjson");
    let gmm = dir.join("bad.json");
    write(&gmm, "{\"components\": [{\"weight\": ");
    let out = bin().args(["entropy"]).arg(&gmm).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn entropy_rejects_non_spd_covariance_with_exit_2() {
    let dir = tmp_dir("nonspd");
    let gmm = dir.join("bad.json");
    write(
        &gmm,
        r#"{"components":[{"weight":1.0,"mean":[0.0,0.0],"cov":[[1.0,2.0],[2.0,1.0]]}]}"#,
    );
    let out = bin().args(["entropy"]).arg(&gmm).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn entropy_component_cap_is_a_numeric_error_exit_3() {
    let dir = tmp_dir("cap");
    let gmm = dir.join("two.json");
    write(
        &gmm,
        r#"{"components":[
            {"weight":0.5,"mean":[0.0],"cov":[[1.0]]},
            {"weight":0.5,"mean":[0.0],"cov":[[4.0]]}]}"#,
    );
    let out = bin()
        .args(["entropy"])
        .arg(&gmm)
        .args(["--method", "taylor-split", "--ways", "4", "--rounds", "6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bounds_report_shape_and_lambda() {
    let out = bin()
        .args(["bounds", "--sigma1", "1", "--sigma2", "2"])
        .output()
        .unwrap();
    let v = json_of(&out);
    let lambda = v["lambda"].as_f64().unwrap();
    assert!((lambda - 1.3596).abs() < 2e-3);
    let lo = v["lower_nats"].as_f64().unwrap();
    let hi = v["upper_nats"].as_f64().unwrap();
    assert!(lo < hi);
    let lo_bits = v["lower_bits"].as_f64().unwrap();
    assert!((lo_bits - lo / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn bounds_rejects_swapped_sigmas() {
    let out = bin()
        .args(["bounds", "--sigma1", "3", "--sigma2", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ci_zero_width_on_constant_file() {
    let dir = tmp_dir("ci");
    let values = dir.join("vals.txt");
    write(&values, "0.7\n0.7\n0.7\n0.7\n0.7\n");
    let out = bin().args(["ci"]).arg(&values).output().unwrap();
    let v = json_of(&out);
    assert_eq!(v["median"], 0.7);
    assert_eq!(v["ci_low"], 0.7);
    assert_eq!(v["ci_high"], 0.7);
}

#[test]
fn ci_is_deterministic_by_seed() {
    let dir = tmp_dir("cidet");
    let values = dir.join("vals.txt");
    let data: Vec<String> = (0..28).map(|i| format!("{}", (i as f64 * 0.37).sin())).collect();
    write(&values, &data.join("\n"));
    let run = |seed: &str| {
        let out = bin()
            .args(["ci"])
            .arg(&values)
            .args(["--B", "200", "--inner-b", "40", "--seed", seed])
            .output()
            .unwrap();
        json_of(&out)
    };
    let a = run("5");
    let b = run("5");
    let c = run("6");
    assert_eq!(a["ci_low"], b["ci_low"]);
    assert_eq!(a["ci_high"], b["ci_high"]);
    assert_ne!(a["ci_low"], c["ci_low"]);
}

#[test]
fn synth_then_mi_round_trip() {
    let dir = tmp_dir("roundtrip");
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        r#"{"n_rois":1,"electrodes_per_roi":2,"trials":4,"blocks_per_trial":4,
            "block_seconds":1.0,"sample_rate_hz":256.0,
            "c1":[[1.0]],"c2":[[16.0]],"electrode_noise":0.0,"seed":11}"#,
    );
    let outdir = dir.join("data");
    let out = bin()
        .args(["synth"])
        .arg(&cfg)
        .arg("--output")
        .arg(&outdir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report_path = dir.join("report.json");
    let out = bin()
        .args(["mi"])
        .arg(outdir.join("dataset.csv"))
        .arg(outdir.join("roimap.json"))
        .args(["--estimator", "quadrature", "--ci", "--B", "200", "--inner-b", "40"])
        .arg("--output")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(v["per_trial"].as_array().unwrap().len(), 4);
    let median = v["median_bits"].as_f64().unwrap();
    // planted sigma1=1, sigma2=4 gives roughly 0.366 bits
    assert!((median - 0.3657).abs() < 0.08, "median {median}");
    let lo = v["ci"]["low_bits"].as_f64().unwrap();
    let hi = v["ci"]["high_bits"].as_f64().unwrap();
    assert!(lo <= hi);
    for t in v["per_trial"].as_array().unwrap() {
        let mi = t["mi_bits"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&mi));
    }
}

#[test]
fn fig7_sweep_single_row_csv() {
    let out = bin()
        .args([
            "fig7-sweep",
            "--p-max",
            "0",
            "--p-step",
            "5",
            "--rounds",
            "1",
            "--mc-samples",
            "20000",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2, "header plus exactly one row: {text}");
    assert_eq!(lines[0], "p,taylor,taylor_split,quadrature,mc");
    let fields: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[0], 0.0);
    // all estimators within a few percent of each other at p = 0
    let quad = fields[3];
    for v in &fields[1..] {
        assert!((v - quad).abs() / quad < 0.05, "{v} vs {quad}");
    }
}

#[test]
fn mi_estimator_consistency_quadrature_vs_mc() {
    let dir = tmp_dir("estcmp");
    let cfg = dir.join("cfg.json");
    write(
        &cfg,
        r#"{"n_rois":2,"electrodes_per_roi":2,"trials":2,"blocks_per_trial":4,
            "block_seconds":1.0,"sample_rate_hz":512.0,
            "c1":[[1.0,0.2],[0.2,1.0]],"c2":[[3.0,0.4],[0.4,3.0]],
            "electrode_noise":0.0,"seed":3}"#,
    );
    let outdir = dir.join("data");
    assert!(bin()
        .args(["synth"])
        .arg(&cfg)
        .arg("--output")
        .arg(&outdir)
        .output()
        .unwrap()
        .status
        .success());
    let run = |est: &str| {
        let out = bin()
            .args(["mi"])
            .arg(outdir.join("dataset.csv"))
            .arg(outdir.join("roimap.json"))
            .args(["--estimator", est, "--mc-samples", "300000", "--seed", "9"])
            .output()
            .unwrap();
        json_of(&out)["median_bits"].as_f64().unwrap()
    };
    let q = run("quadrature");
    let mc = run("mc");
    assert!((q - mc).abs() < 0.01, "quadrature {q} vs mc {mc}");
}
