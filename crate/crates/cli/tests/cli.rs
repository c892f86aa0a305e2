use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use affgeo_cli::{bundled, load, run, Kind, RunError, Scenario};

fn affgeo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affgeo"))
        .args(args)
        .env_remove("AFFGEO_OUT")
        .current_dir(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const OSCILLATOR_SHORT: &str = r#"
id = "short"
kind = "timedep"
description = "short oscillator"

[timedep]
dim = 1
hamiltonian = "p^2/2 + q^2/2"
initial = { q = 1.0, t = 0.0, p = 0.0 }
step = 0.01
duration = 1.0
grid = [-1.0, 1.0]
"#;

#[test]
fn missing_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = affgeo(&["run", "no/such/scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no such file"));
}

#[test]
fn malformed_scenarios_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", "id = \n".to_string()),
        ("unknown_var.toml", OSCILLATOR_SHORT.replace("q^2/2", "z^2/2")),
        ("wrong_section.toml", OSCILLATOR_SHORT.replace("[timedep]", "[newton]")),
        ("missing_initial.toml", OSCILLATOR_SHORT.replace("p = 0.0 }", "}")),
        ("unknown_field.toml", OSCILLATOR_SHORT.replace("grid =", "gird =")),
    ];
    for (name, text) in cases {
        let path = write(dir.path(), name, &text);
        let o = affgeo(&["run", &path], dir.path());
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn blow_up_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = OSCILLATOR_SHORT.replace("p^2/2 + q^2/2", "p^2/2 - q^3/3").replace("duration = 1.0", "duration = 20.0");
    let path = write(dir.path(), "blow.toml", &text);
    let o = affgeo(&["run", &path], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-finite state at step"));
}

#[test]
fn listing() {
    let dir = tempfile::tempdir().unwrap();
    let o = affgeo(&["list", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows.len() >= 8);
    let o = affgeo(&["list", "--json", "--kind", "newton"], dir.path());
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["kind"] == "newton"));
    let o = affgeo(&["list"], dir.path());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), bundled().len());
    assert_eq!(affgeo(&["list", "--kind", "bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn output_directory_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "short.toml", OSCILLATOR_SHORT);
    let o = affgeo(&["run", &path, "--out", "results", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/short.report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["pass"], true);
    assert_eq!(report["artifacts"][0], "short.csv");
    let csv = fs::read_to_string(dir.path().join("results/short.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);

    let o = Command::new(env!("CARGO_BIN_EXE_affgeo"))
        .args(["run", &path, "--out", "ignored", "--json"])
        .env("AFFGEO_OUT", dir.path().join("env"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env/short.report.json").is_file());
    assert!(!dir.path().join("ignored").exists());
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout["scenario"], "short");
}

#[test]
fn bad_affgebra_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = affgeo(&["run", "cross_product_affgebra_bad", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&serde_json::Value> =
        report["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).collect();
    assert_eq!(failed.len(), 1);
    let witness = failed[0]["witness"].as_str().unwrap();
    assert!(witness.starts_with("(o"), "{witness}");
    assert!(witness.contains("->"));
}

#[test]
fn every_bundled_scenario_parses_and_kinds_are_known() {
    for b in bundled() {
        let s = b.scenario();
        assert_eq!(s.id, b.name);
        assert!(Kind::ALL.contains(&s.kind));
    }
    assert!(matches!(load("nonexistent_bundle"), Err(RunError::Parse(_))));
}

#[test]
fn library_run_is_deterministic() {
    let s = Scenario::from_toml(OSCILLATOR_SHORT).unwrap();
    let (a, b) = (run(&s, None).unwrap(), run(&s, None).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.report_json(), b.report_json());
    assert_eq!(a.artifact("short.csv").unwrap().contents.lines().count(), 102);
}
