use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eip_cli::config::{DataSpec, MotionSpec};
use eip_cli::Scenario;
use eip_core::discretization::AssemblyOptions;
use eip_core::solver::benchmarks::Benchmark;
use eip_core::solver::discrete_inf_sup;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn eip(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eip"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn bundled_heat_scenario() {
    let s = Scenario::load(&scenarios().join("heat_static.json")).unwrap();
    assert!(matches!(s.motion, MotionSpec::Identity { gamma0, .. } if gamma0 == 0.5));
    let c = s.coefficient().unwrap();
    assert!(c.is_active(eip_core::Side::One) && c.is_active(eip_core::Side::Two));
    assert_eq!(c.global_constants().unwrap().c_alpha, 1.0);
    assert!(matches!(s.data, DataSpec::Manufactured { .. }));
}

#[test]
fn every_bundled_scenario_round_trips() {
    let mut seen = 0;
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = Scenario::from_json(&s.normalized_json()).unwrap();
        assert_eq!(s, again, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 10);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"coefficient": {"branch1": {"kind": "constant", "value": 1}, "branch2": {"kind": "constant", "value": 1}}}"#).unwrap();
    let out = eip(&["solve"], &bad, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("motion"));

    let text = fs::read_to_string(scenarios().join("zero_data.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["coefficient"]["alpha0"] = serde_json::json!(-1.0);
    fs::write(&bad, v.to_string()).unwrap();
    let out = eip(&["solve"], &bad, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coefficient.alpha0"));

    v["coefficient"]["alpha0"] = serde_json::json!(1.0);
    v["discretization"]["nx"] = serde_json::json!(4);
    fs::write(&bad, v.to_string()).unwrap();
    let out = eip(&["solve"], &bad, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nx"));
}

#[test]
fn infsup_on_heat_matches_solver() {
    let dir = tempfile::tempdir().unwrap();
    let out = eip(&["infsup"], &scenarios().join("heat_static.json"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("infsup.csv"));
    assert_eq!(rows.len(), 1);
    let c: f64 = rows[0][3].parse().unwrap();
    let p = Benchmark::Heat.problem().unwrap();
    let sys = p.assemble(&p.mesh(4, 4).unwrap(), AssemblyOptions::default()).unwrap();
    let want = discrete_inf_sup(&sys).unwrap().value;
    assert!(c > 0.0 && (c - want).abs() <= 1e-14 * want, "{c} vs {want}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["artifacts"].as_array().unwrap().iter().any(|a| a == "infsup.csv"));
}

#[test]
fn zero_data_solve_writes_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = eip(&["solve"], &scenarios().join("zero_data.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("solve.csv"));
    assert_eq!(rows.len(), 9 * 9);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn convergence_on_m1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = eip(&["convergence"], &scenarios().join("m1.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("convergence.csv"));
    assert_eq!(rows.len(), 5);
    let order: f64 = rows[4][3].parse().unwrap();
    assert!((order - 2.0).abs() <= 0.3);
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--tol-scale", "1e-30"];
    let out = eip(&args, &scenarios().join("m1.json"), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let checks = csv_rows(&dir.path().join("checks.csv"));
    assert!(checks.iter().any(|r| r[4] == "false"));
    args[2] = "0";
    assert_eq!(eip(&args, &scenarios().join("m1.json"), dir.path()).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let config = scenarios().join("m2.json");
    assert_eq!(eip(&["solve", "--jobs", "1"], &config, &a).status.code(), Some(0));
    assert_eq!(eip(&["solve", "--jobs", "4"], &config, &b).status.code(), Some(0));
    for f in ["solve.csv", "checks.csv", "scenario.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = eip(&["shift", "--seed", "42"], &scenarios().join("heat_static.json"), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let dumped = Scenario::load(&dir.path().join("scenario.json")).unwrap();
    assert_eq!(dumped.seed, 42);
}
