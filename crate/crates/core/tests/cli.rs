//! End-to-end runs of the `qdsfluct` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn qdsfluct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdsfluct"))
        .args(args)
        .env("QDSFLUCT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn run(command: &str, model: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qdsfluct(&args)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run("validate", &fixture("qubit2r.json"), dir.path(), &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS")));
    assert!(dir.path().join("validation.json").exists());
    assert!(dir.path().join("manifest-validate.json").exists());

    let reducible = run("validate", &fixture("reducible.json"), dir.path(), &[]);
    assert_eq!(reducible.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&reducible.stdout).lines().any(|l| l.starts_with("FAIL")));

    let refused = run("cgf-scan", &fixture("reducible.json"), dir.path(), &[]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
}

#[test]
fn malformed_model_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("qubit2r.json")).unwrap().replace("\"beta\": 2.0", "\"beta\": -2.0");
    let model = dir.path().join("bad.json");
    std::fs::write(&model, text).unwrap();
    let out = run("validate", &model, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.json"), "{stderr}");
    assert!(stderr.contains("reservoirs[1].beta"), "{stderr}");

    let missing = run("validate", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(missing.status.code(), Some(4));
    assert_eq!(qdsfluct(&["cgf-scan"]).status.code(), Some(2));
    assert_eq!(qdsfluct(&["--help"]).status.code(), Some(0));
}

#[test]
fn symmetry_check_passes_on_the_qutrit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("symmetry-check", &fixture("qutrit_generic.json"), dir.path(), &["--resolution", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("symmetry.json"));
    assert_eq!(report["passed"], true);
    let (header, rows) = csv_rows(&dir.path().join("symmetry.csv"));
    assert_eq!(header[1], "residual");
    let es = rows.iter().find(|r| r[0].contains("es")).expect("an ES row");
    assert!(es[1].parse::<f64>().unwrap() <= 1e-8);
}

#[test]
fn cgf_scan_writes_one_column_per_reservoir() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("cgf-scan", &fixture("qutrit_generic.json"), dir.path(), &["--alpha-box", "-1:2", "--resolution", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("cgf_scan.csv"));
    let reservoirs = header.len() - 2;
    assert_eq!(header[reservoirs..], ["e", "gap"]);
    assert_eq!(rows.len(), 7usize.pow(reservoirs as u32));
    for row in &rows {
        assert!(row[reservoirs].parse::<f64>().unwrap().is_finite());
        assert!(row[reservoirs + 1].parse::<f64>().unwrap() > 0.0);
    }
    let manifest = json(&dir.path().join("manifest-cgf-scan.json"));
    assert_eq!(manifest["command"], "cgf-scan");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"cgf_scan.csv") && names.contains(&"cgf_scan.json"));
}

#[test]
fn rate_function_vanishes_at_equilibrium_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("rate-function", &fixture("qubit2r_equilibrium.json"), dir.path(), &["--resolution", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&dir.path().join("rate_function.csv"));
    let zero = rows
        .iter()
        .find(|r| r[..r.len() - 1].iter().all(|v| v.parse::<f64>().unwrap() == 0.0))
        .expect("the mean lies on the sampled line");
    assert!(zero.last().unwrap().parse::<f64>().unwrap().abs() < 1e-8);
    for r in &rows {
        let value: f64 = r.last().unwrap().parse().unwrap();
        assert!(value.is_nan() || value >= -1e-8);
    }
}

#[test]
fn linear_response_requires_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run("linear-response", &fixture("qubit2r_equilibrium.json"), dir.path(), &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("linear_response.json").exists());
    let out = run("linear-response", &fixture("qubit2r.json"), &dir.path().join("neq"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_is_reproducible_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["--samples", "2000", "--t", "2", "--seed", "11", "--resolution", "2"];
    for d in [&a, &b] {
        let out = run("compare", &fixture("qubit2r.json"), d, &args);
        assert!(matches!(out.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["compare.csv", "compare.json", "manifest-compare.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let again = run("compare", &fixture("qubit2r.json"), &a, &args);
    assert_eq!(again.status.code(), Some(4));
    let forced = run("compare", &fixture("qubit2r.json"), &a, &[&args[..], &["--force"]].concat());
    assert!(matches!(forced.status.code(), Some(0) | Some(3)));
    assert_eq!(std::fs::read(a.join("compare.csv")).unwrap(), std::fs::read(b.join("compare.csv")).unwrap());
}

#[test]
fn unravel_reports_sample_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "unravel",
        &fixture("qubit2r.json"),
        dir.path(),
        &["--samples", "500", "--t", "3", "--seed", "4", "--trajectories"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("unravel_samples.csv"));
    assert_eq!(rows.len(), 500);
    assert!(header.len() >= 2);
    assert!(dir.path().join("trajectories.csv").exists());
    assert!(json(&dir.path().join("unravel_summary.json")).is_object());
}
