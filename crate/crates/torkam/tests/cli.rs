use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn torkam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torkam")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ZERO_SYMBOL: &str = r#"
mode = "quantum_renorm"
d = 1
omega = [1.0]
varsigma = 1.0
hbar = [0.1]

[symbol]
cos = [{ k = [1], m = [1], amp = 0.0 }]
"#;

#[test]
fn zero_perturbation_runs_without_steps() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", ZERO_SYMBOL);
    let out = dir.path().join("out");
    let res = torkam(&["run", "--strict", "--out", s(&out), s(&cfg)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("report.json"));
    let run = &report["result"]["quantum_renorm"]["runs"][0];
    assert_eq!(run["steps"].as_array().unwrap().len(), 0);
    assert_eq!(run["r_total_norm"].as_f64(), Some(0.0));
    assert_eq!(run["converged"], Value::Bool(true));
    assert_eq!(fs::read_to_string(out.join("steps.csv")).unwrap(), "hbar,n,v_norm,f_norm,r_norm,ratio\n");
}

#[test]
fn strict_run_above_threshold_names_the_condition() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "big.toml", &ZERO_SYMBOL.replace("amp = 0.0", "amp = 0.5"));
    let out = dir.path().join("out");
    let res = torkam(&["run", "--strict", "--out", s(&out), s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    let err = read_json(&out.join("error.json"));
    assert_eq!(err["kind"], "blocked");
    assert!(err["message"].as_str().unwrap().contains("quantum_smallness"));
    assert!(String::from_utf8_lossy(&res.stderr).contains("quantum_smallness"));
    assert!(!out.join("report.json").exists());
}

#[test]
fn exploratory_run_records_failed_checks() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "big.toml",
        &ZERO_SYMBOL.replace("amp = 0.0", "amp = 0.05").replace("[symbol]", "[kam]\nn_max = 2\n\n[symbol]"),
    );
    let out = dir.path().join("out");
    let res = torkam(&["run", "--out", s(&out), s(&cfg)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("report.json"));
    let checks = report["validation"]["checks"].as_array().unwrap();
    let small = checks.iter().find(|c| c["id"] == "quantum_smallness").unwrap();
    assert_eq!(small["passed"], Value::Bool(false));
    assert_eq!(report["validation"]["blocked"], Value::Bool(false));
}

#[test]
fn resonant_frequency_is_blocked_with_a_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "resonant.toml",
        &ZERO_SYMBOL.replace("d = 1", "d = 2").replace("omega = [1.0]", "omega = [1.0, 2.0]").replace(
            "cos = [{ k = [1], m = [1], amp = 0.0 }]",
            "cos = [{ k = [1, 0], m = [1, 0], amp = 1e-6 }]",
        ),
    );
    let res = torkam(&["validate", "--strict", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["blocked"], Value::Bool(true));
    let check = v["checks"].as_array().unwrap().iter().find(|c| c["id"] == "nonresonant_frequency").unwrap();
    assert_eq!(check["passed"], Value::Bool(false));
    let k: Vec<i64> = check["witness"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
    assert_eq!(k[0] + 2 * k[1], 0);
    assert!(k != [0, 0]);
}

#[test]
fn validate_passes_a_good_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", ZERO_SYMBOL);
    let res = torkam(&["validate", "--strict", s(&cfg)]);
    assert_eq!(res.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "typo.toml", &format!("{ZERO_SYMBOL}\nbogus = 1\n"));
    let out = dir.path().join("out");
    let res = torkam(&["run", "--out", s(&out), s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(read_json(&out.join("error.json"))["kind"], "config");

    let missing = dir.path().join("missing.toml");
    assert_eq!(torkam(&["validate", s(&missing)]).status.code(), Some(2));

    let flat = write_config(&dir, "flat.toml", &ZERO_SYMBOL.replace("omega = [1.0]", "omega = [1.0]\ngamma = 1.0"));
    assert_eq!(torkam(&["validate", s(&flat)]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", ZERO_SYMBOL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let res = torkam(&["run", "--out", s(&blocker.join("out")), s(&cfg)]);
    assert_eq!(res.status.code(), Some(1));
    // the error.json itself cannot be written, so the diagnostic only reaches stderr
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.starts_with("could not write"));
    let err: Value = serde_json::from_str(&stderr[stderr.find('{').unwrap()..]).unwrap();
    assert_eq!(err["kind"], "io");
}

#[test]
fn circle_field_conjugates_to_the_explicit_frequency() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "circle.toml",
        r#"
mode = "classical_kam"
d = 1
omega = [1.0]
varsigma = 1.0
k_max = 100

[vector_field]
sin = [{ k = [1], amp = [0.01] }]

[classical]
cutoff = 32
tol = 1e-13
"#,
    );
    let out = dir.path().join("out");
    let res = torkam(&["run", "--strict", "--out", s(&out), s(&cfg)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&out.join("report.json"));
    let kam = &report["result"]["classical_kam"];
    assert_eq!(kam["converged"], Value::Bool(true));
    let phi = kam["frequency"]["phi"][0].as_f64().unwrap();
    assert!((phi - (1.0f64 + 1e-4).sqrt()).abs() < 1e-12, "φ = {phi}");
    assert!(fs::read_to_string(out.join("residuals.csv")).unwrap().lines().count() > 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "random.toml",
        &ZERO_SYMBOL
            .replace("cos = [{ k = [1], m = [1], amp = 0.0 }]", "random = { modes = 3, band = 2, amplitude = 1e-4 }")
            .replace("[symbol]", "[kam]\nn_max = 2\n\n[symbol]"),
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let res = torkam(&["run", "--seed", seed, "--out", s(out), s(&cfg)]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let bytes = |p: &Path| fs::read(p.join("report.json")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
}
