use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contact-noether"));
    cmd.env_remove("CONTACT_NOETHER_OUT");
    cmd
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, body).unwrap();
    path
}

fn free_particle(invariant: &str) -> String {
    format!(
        r#"{{
  "name": "free-{invariant}",
  "system": {{ "h": "p0^2/2", "dim": 1 }},
  "initial": {{ "q": [0], "p": [1.5], "S": 0, "t": 0 }},
  "t_end": 3,
  "invariants": [{{ "label": "F", "expr": "{invariant}" }}],
  "checks": [{{ "kind": "drift", "invariant": "F", "threshold": 1e-9 }}]
}}"#
    )
}

#[test]
fn list_systems_shows_three_builtins() {
    let out = bin().arg("list-systems").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    for name in ["kepler", "td-kepler", "harmonic-dissipative"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{text}");
    }
}

#[test]
fn solve_scaling_generic_kepler_row() {
    let out = bin().args(["solve-scaling", "--k=-1", "--f=const"]).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("GenericK_F2")).unwrap_or_else(|| panic!("{text}"));
    let cols: Vec<&str> = row.split_whitespace().collect();
    // alpha, beta, gamma, sigma
    assert_eq!(&cols[1..5], ["2/3", "-1/3", "1/3", "1"]);
    assert!(row.contains("2/3*q.p - t*h - 1/3*S"));
}

#[test]
fn solve_scaling_dissipative_row_and_json() {
    let out = bin().args(["solve-scaling", "--k=2", "--g=homogeneous", "--kappa=1"]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).lines().any(|l| l.starts_with("Dissipative_F0")));

    let out = bin().args(["solve-scaling", "--k", "-2", "--json"]).output().unwrap();
    let rows: Value = serde_json::from_slice(&out.stdout).unwrap();
    let f1 = rows.as_array().unwrap().iter().find(|r| r["case"] == "Kminus2_F1").unwrap();
    assert_eq!(f1["invariant"], "q.p - 2*t*h");
    assert_eq!((f1["alpha"].as_f64(), f1["sigma"].as_f64(), f1["gamma"].as_f64()), (Some(1.0), Some(2.0), Some(0.0)));
}

#[test]
fn solve_scaling_rejects_bad_arguments() {
    let out = bin().args(["solve-scaling", "--k=2", "--g=homogeneous", "--kappa=2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["solve-scaling", "--k=2", "--f=power"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kepler_scaling_scenario_passes_with_small_drift() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("check").arg(bundled("kepler-scaling")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("kepler-scaling/report.json")).unwrap()).unwrap();
    let drift = report["checks"].as_array().unwrap().iter().find(|c| c["label"] == "drift:Q_K").unwrap();
    assert!(drift["value"].as_f64().unwrap() <= 1e-7);
    let csv = std::fs::read_to_string(dir.path().join("kepler-scaling/trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,q0,q1,q2,p0,p1,p2,S,H_K,Q_K,F2_K,L3");
}

#[test]
fn every_bundled_scenario_passes_in_one_parallel_run() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["kepler-scaling", "harmonic-dissipative", "lewis-riesenfeld", "td-kepler", "free-particle"];
    let mut cmd = bin();
    cmd.arg("check").arg("--quiet").arg("--out").arg(dir.path());
    for n in names {
        cmd.arg(bundled(n));
    }
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for n in names {
        assert!(text.contains(&format!("{n}: PASS")), "{text}");
        assert!(dir.path().join(n).join("report.txt").exists());
    }
}

#[test]
fn free_particle_momentum_passes_and_position_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "p", &free_particle("p0"));
    let q = write_scenario(dir.path(), "q", &free_particle("q0"));
    let out = bin().arg("check").arg(&p).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("free-p0/report.txt")).unwrap();
    assert!(report.contains("check[0].value = 0e0"), "{report}");

    let out = bin().arg("check").arg(&q).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("free-q0/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["checks"][0]["value"].as_f64().unwrap() > 1.0);

    // Mixed runs report the worst code.
    let out = bin().arg("check").arg(&p).arg(&q).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_scenario(dir.path(), "bad", "{\n  \"name\": \"bad\",\n  \"system\": { \"h\": \"p0^2/2\", \"dim\": 1 },\n  \"t_end\": \"x\"\n}");
    let out = bin().arg("check").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 4"), "{err}");

    let missing = dir.path().join("missing.json");
    let out = bin().arg("check").arg(&missing).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Radial infall reaches the excluded origin.
    let body = r#"{
  "name": "infall",
  "system": { "builtin": "kepler" },
  "initial": { "q": [1, 0, 0], "p": [0, 0, 0], "S": 0, "t": 0 },
  "t_end": 10,
  "invariants": ["H_K"],
  "checks": [{ "kind": "drift", "invariant": "H_K", "threshold": 1e-7 }]
}"#;
    let path = write_scenario(dir.path(), "infall", body);
    let out = bin().arg("check").arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trajectory"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = bin().arg("check").arg(bundled("harmonic-dissipative")).arg("--seed=7").arg("--out").arg(dir.path()).output().unwrap();
        assert!(out.status.success());
    }
    for file in ["report.txt", "report.json", "trajectory.csv"] {
        let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("harmonic-dissipative").join(file)).unwrap();
        assert_eq!(read(&a), read(&b), "{file} differs");
    }
    let report = std::fs::read_to_string(a.path().join("harmonic-dissipative/report.txt")).unwrap();
    assert!(report.contains("seed = 7"));
}

#[test]
fn simulate_writes_only_the_trajectory_and_honours_env_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("simulate").arg(bundled("td-kepler")).env("CONTACT_NOETHER_OUT", dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Vec<String> = std::fs::read_dir(dir.path().join("td-kepler"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(written, ["trajectory.csv"]);
}

#[test]
fn tolerance_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("check")
        .arg(bundled("free-particle"))
        .args(["--tol-override", "1e-6", "--quiet"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1);
    let report = std::fs::read_to_string(dir.path().join("free-particle/report.txt")).unwrap();
    assert!(report.contains("integrator.rel_tol = 1e-6"), "{report}");
}
