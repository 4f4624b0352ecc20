//! End-to-end tests of the hinfgp binary: exit codes, output layout,
//! determinism under fixed seeds, and manifest replay.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hinfgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hinfgp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_geo_spec(dir: &Path) -> String {
    let path = dir.join("geo.json");
    fs::write(&path, r#"{"type":"geometric","alpha":0.5}"#).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn sample_writes_realizations_and_manifest_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let output = hinfgp(&[
            "sample",
            "--kernel",
            &spec,
            "--count",
            "3",
            "--seed",
            "1",
            "--grid-points",
            "128",
            "--out",
            &out.to_string_lossy(),
        ]);
        assert!(output.status.success(), "{:?}", output);
    }
    for i in 0..3 {
        let name = format!("realization_{i:03}.csv");
        let a = fs::read(out1.join(&name)).unwrap();
        let b = fs::read(out2.join(&name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "sample");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for (out, seed) in [(&out1, "1"), (&out2, "2")] {
        let output = hinfgp(&[
            "sample",
            "--kernel",
            &spec,
            "--seed",
            seed,
            "--grid-points",
            "64",
            "--out",
            &out.to_string_lossy(),
        ]);
        assert!(output.status.success());
    }
    let a = fs::read(out1.join("realization_000.csv")).unwrap();
    let b = fs::read(out2.join("realization_000.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn missing_kernel_file_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let output = hinfgp(&[
        "sample",
        "--kernel",
        &missing.to_string_lossy(),
        "--out",
        &dir.path().join("o").to_string_lossy(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("nope.json"),
        "stderr should name the path: {stderr}"
    );
}

#[test]
fn bad_gamma_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out = dir.path().join("r.csv");
    for bad in ["1..4", "4:1:0.5", "1:4:-1", "1:4", "a:b:c"] {
        let output = hinfgp(&[
            "excursion",
            "--kernel",
            &spec,
            "--gamma-grid",
            bad,
            "--out",
            &out.to_string_lossy(),
        ]);
        assert_eq!(output.status.code(), Some(2), "grid '{bad}' should be rejected");
    }
}

#[test]
fn excursion_report_has_expected_rows_and_mc_columns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out = dir.path().join("report.csv");
    let output = hinfgp(&[
        "excursion",
        "--kernel",
        &spec,
        "--gamma-grid",
        "1:4:0.5",
        "--n-omega",
        "80",
        "--n-theta",
        "64",
        "--validate",
        "2000",
        "--seed",
        "5",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8, "header + 7 gamma rows");
    assert!(lines[0].contains("mc_upcrossings"));
    assert!(lines[0].contains("mc_excursion_probability"));
    // Bound column dominates the MC probability column on every row.
    for row in &lines[1..] {
        let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
        let (bound, mc_p, mc_se) = (fields[3], fields[6], fields[7]);
        assert!(bound >= mc_p - 3.0 * mc_se, "row {row}");
    }
    assert!(dir.path().join("report.manifest.json").exists());
}

#[test]
fn validate_writes_mc_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out = dir.path().join("mc.csv");
    let output = hinfgp(&[
        "validate",
        "--kernel",
        &spec,
        "--gamma-grid",
        "1:2:0.5",
        "-N",
        "500",
        "--seed",
        "3",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("gamma,mc_upcrossings"));
}

#[test]
fn validate_rejects_cozine_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coz.json");
    fs::write(&path, r#"{"type":"cozine","a":0.9,"omega0":1.57}"#).unwrap();
    let output = hinfgp(&[
        "validate",
        "--kernel",
        &path.to_string_lossy(),
        "--gamma-grid",
        "1:2:1",
        "-N",
        "200",
        "--out",
        &dir.path().join("mc.csv").to_string_lossy(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn demo_resonance_emits_etfe_truth_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let output = hinfgp(&[
        "demo-resonance",
        "--seed",
        "7",
        "--restarts",
        "2",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    let etfe = fs::read_to_string(out.join("etfe.csv")).unwrap();
    assert_eq!(etfe.lines().count(), 26, "header + 25 filter observations");
    assert_eq!(etfe.lines().next().unwrap(), "re_z,im_z,re_y,im_y");
    let truth = fs::read_to_string(out.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 201);
    let posterior = fs::read_to_string(out.join("posterior.csv")).unwrap();
    assert_eq!(posterior.lines().count(), 201);
    assert!(out.join("model.json").exists());
}

#[test]
fn regress_fits_and_handles_empty_data() {
    let dir = tempfile::tempdir().unwrap();
    // Small synthetic dataset on the unit circle.
    let data_path = dir.path().join("data.csv");
    let mut csv = String::from("re_z,im_z,re_y,im_y\n");
    for i in 0..12 {
        let omega = 0.2 + 0.22 * i as f64;
        let (s, c) = omega.sin_cos();
        csv.push_str(&format!("{c},{s},{},{}\n", (2.0 * omega).cos(), (1.3 * omega).sin()));
    }
    fs::write(&data_path, &csv).unwrap();
    let out = dir.path().join("fit");
    let output = hinfgp(&[
        "regress",
        "--data",
        &data_path.to_string_lossy(),
        "--noise-var",
        "0.01",
        "--family",
        "geometric",
        "--restarts",
        "2",
        "--grid-points",
        "50",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    let posterior = fs::read_to_string(out.join("posterior.csv")).unwrap();
    assert_eq!(posterior.lines().count(), 51);
    assert!(posterior.starts_with("omega,re_mean,im_mean,sigma,mag_lo,mag_hi,phase_lo,phase_hi"));

    // Header-only dataset: prior curves plus a warning.
    let empty_path = dir.path().join("empty.csv");
    fs::write(&empty_path, "re_z,im_z,re_y,im_y\n").unwrap();
    let out2 = dir.path().join("prior");
    let output = hinfgp(&[
        "regress",
        "--data",
        &empty_path.to_string_lossy(),
        "--noise-var",
        "0.01",
        "--family",
        "geometric",
        "--grid-points",
        "20",
        "--out",
        &out2.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    assert!(String::from_utf8_lossy(&output.stderr).contains("warning"));
    let posterior = fs::read_to_string(out2.join("posterior.csv")).unwrap();
    assert_eq!(posterior.lines().count(), 21);
}

#[test]
fn rerun_reproduces_outputs_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_geo_spec(dir.path());
    let out = dir.path().join("report.csv");
    let output = hinfgp(&[
        "excursion",
        "--kernel",
        &spec,
        "--gamma-grid",
        "1:2:0.5",
        "--n-omega",
        "50",
        "--n-theta",
        "32",
        "--seed",
        "11",
        "--out",
        &out.to_string_lossy(),
    ]);
    assert!(output.status.success());
    let manifest = dir.path().join("report.manifest.json");
    let out2 = dir.path().join("replay.csv");
    let output = hinfgp(&[
        "rerun",
        "--manifest",
        &manifest.to_string_lossy(),
        "--out",
        &out2.to_string_lossy(),
    ]);
    assert!(output.status.success(), "{:?}", output);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
}
