use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn screamsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screamsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("SCREAMSIM_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = screamsim(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    screamsim(dir, args).status.code().unwrap()
}

/// `mse_pct` of the data rows.
fn mse_column(csv: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == "mse_pct").unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn sng_sweep_sw_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "sng-sweep",
            "--source",
            "sw",
            "--M",
            "8",
            "--N",
            "32",
            "--samples",
            "100000",
        ],
    );
    assert!(out.starts_with("source,M,N,samples,mse_pct\n"));
    let v = mse_column(&out)[0];
    assert!((v / 0.529 - 1.0).abs() <= 0.15, "{v}");
}

#[test]
fn zero_samples_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["sng-sweep", "--samples", "0"]), 2);
    assert_eq!(code(dir.path(), &["op-sweep", "--samples", "0"]), 2);
}

#[test]
fn bad_names_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["op-sweep", "--ops", "pow"]), 2);
    assert_eq!(code(dir.path(), &["sng-sweep", "--source", "dice"]), 2);
    assert_eq!(code(dir.path(), &["app", "sharpen"]), 2);
    assert_eq!(code(dir.path(), &["app", "composite", "--backend", "gpu"]), 2);
    assert_eq!(code(dir.path(), &["sng-sweep", "--bogus"]), 2);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["app", "bilinear", "--inputs", "nope.pgm"]), 3);
    assert_eq!(code(dir.path(), &["cost", "--report", "nope.json"]), 3);
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_screamsim"))
        .args(["cost", "--compare", "composite"])
        .env("SCREAMSIM_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn op_sweep_reference_cells() {
    let dir = tempfile::tempdir().unwrap();
    let mul = mse_column(&ok(
        dir.path(),
        &[
            "op-sweep",
            "--ops",
            "mul",
            "--source",
            "imsng",
            "--N",
            "64",
            "--samples",
            "10000",
        ],
    ))[0];
    assert!((mul / 0.255 - 1.0).abs() <= 0.20, "{mul}");
    let div = mse_column(&ok(
        dir.path(),
        &[
            "op-sweep",
            "--ops",
            "div",
            "--source",
            "lfsr",
            "--N",
            "512",
            "--samples",
            "10000",
        ],
    ))[0];
    assert!((div / 1.477 - 1.0).abs() <= 0.25, "{div}");
}

#[test]
fn op_sweep_rows_are_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(
        dir.path(),
        &[
            "op-sweep",
            "--ops",
            "min,mul",
            "--source",
            "sw,imsng",
            "--N",
            "64,32",
            "--samples",
            "50",
        ],
    );
    let keys: Vec<String> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        [
            "mul,imsng,8,32",
            "mul,imsng,8,64",
            "mul,sw,8,32",
            "mul,sw,8,64",
            "min,imsng,8,32",
            "min,imsng,8,64",
            "min,sw,8,32",
            "min,sw,8,64",
        ]
    );
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sng-sweep",
        "--source",
        "imsng,lfsr",
        "--N",
        "32,64",
        "--samples",
        "300",
        "--seed",
        "9",
    ];
    assert_eq!(ok(dir.path(), &args), ok(dir.path(), &args));
    let other = ok(
        dir.path(),
        &[
            "sng-sweep",
            "--source",
            "imsng,lfsr",
            "--N",
            "32,64",
            "--samples",
            "300",
            "--seed",
            "10",
        ],
    );
    assert_ne!(ok(dir.path(), &args), other);
}

#[test]
fn cim_and_sw_backends_report_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for app in ["composite", "bilinear", "matting"] {
        let cim = json(&ok(
            dir.path(),
            &["app", app, "--N", "32", "--pf", "0", "--backend", "cim", "--seed", "4"],
        ));
        let sw = json(&ok(
            dir.path(),
            &["app", app, "--N", "32", "--pf", "0", "--backend", "sw", "--seed", "4"],
        ));
        assert_eq!(cim["metrics"], sw["metrics"], "{app}");
    }
}

#[test]
fn runs_are_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let m = json(&ok(
        dir.path(),
        &[
            "app",
            "composite",
            "--N",
            "8",
            "--pf",
            "0.01",
            "--runs",
            "100",
            "--seed",
            "2",
        ],
    ));
    assert_eq!(m["runs"], 100);
    assert_eq!(m["metrics"]["per_run"].as_array().unwrap().len(), 100);
    let std = m["metrics"]["ssim"]["std"].as_f64().unwrap();
    let mean = m["metrics"]["ssim"]["mean"].as_f64().unwrap();
    assert!(std > 0.0 && mean > 0.0 && mean < 100.0, "{mean} ± {std}");
}

#[test]
fn matting_with_equal_fg_and_bg_warns_and_zeroes_alpha() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["corpus", "--out", "imgs"]);
    let out = screamsim(
        dir.path(),
        &[
            "app",
            "matting",
            "--inputs",
            "imgs/rings.pgm",
            "imgs/rings.pgm",
            "imgs/alpha_ramp.pgm",
            "--N",
            "32",
            "--out",
            "a.pgm",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let alpha = screamsim::GrayImage::load(dir.path().join("a.pgm")).unwrap();
    assert!(alpha.pixels().iter().all(|&p| p == 0));
    let m = json(&std::fs::read_to_string(dir.path().join("a.json")).unwrap());
    assert_eq!(m["metrics"]["undefined_alpha_pixels"], 64 * 64);
}

#[test]
fn config_presets_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"seed": 5, "sng-sweep": {"samples": 40, "N": [32], "source": ["sw"]}}"#,
    )
    .unwrap();
    let preset = ok(dir.path(), &["--config", "c.json", "sng-sweep"]);
    let explicit = ok(
        dir.path(),
        &[
            "sng-sweep",
            "--seed",
            "5",
            "--samples",
            "40",
            "--N",
            "32",
            "--source",
            "sw",
        ],
    );
    assert_eq!(preset, explicit);
    let overridden = ok(dir.path(), &["--config", "c.json", "sng-sweep", "--N", "64"]);
    assert!(overridden.contains("sw,8,64,40,"));
    std::fs::write(dir.path().join("bad.json"), r#"{"sng-sweep": {"sample": 3}}"#).unwrap();
    assert_eq!(code(dir.path(), &["--config", "bad.json", "sng-sweep"]), 2);
}

#[test]
fn cost_report_prices_an_app_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["app", "composite", "--N", "16", "--out", "c.pgm"]);
    let report = ok(dir.path(), &["cost", "--report", "c.json"]);
    assert!(report.starts_with("event,count,ns,nJ\n"));
    let total = report.lines().last().unwrap();
    assert!(total.starts_with("total,"));
    let ns: f64 = total.split(',').nth(2).unwrap().parse().unwrap();
    assert!(ns > 0.0);
}

#[test]
fn cost_modes_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["cost"]), 2);
    assert_eq!(code(dir.path(), &["cost", "--calibrate", "--compare", "matting"]), 2);
}

#[test]
fn calibration_writes_loadable_costs() {
    let dir = tempfile::tempdir().unwrap();
    let residuals = ok(dir.path(), &["cost", "--calibrate", "--out", "costs.json"]);
    assert_eq!(residuals.lines().count(), 5);
    let a = ok(dir.path(), &["cost", "--compare", "bilinear", "--costs", "costs.json"]);
    let b = ok(dir.path(), &["cost", "--compare", "bilinear"]);
    assert_eq!(a, b);
}

#[test]
fn fault_study_with_given_rate() {
    let dir = tempfile::tempdir().unwrap();
    let m = json(&ok(
        dir.path(),
        &[
            "fault-study",
            "--apps",
            "composite",
            "--N",
            "16",
            "--pf",
            "0.01",
            "--csv",
            "f.csv",
        ],
    ));
    assert_eq!(m["p_f"], 0.01);
    assert!(m["calibration"].is_null());
    let rows = m["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["pipeline"], "sc");
    assert_eq!(rows[1]["pipeline"], "binary");
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
