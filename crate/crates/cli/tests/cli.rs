use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sc3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sc3"))
        .args(args)
        .env("SC3_LOG", "error")
        .output()
        .expect("sc3 runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn total_cost(summary: &Path) -> f64 {
    let v: Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    match &v["result"]["total_lqr_cost"] {
        Value::String(s) if s == "inf" => f64::INFINITY,
        x => x.as_f64().unwrap(),
    }
}

fn solve(dir: &Path, scenario_name: &str, scheme: &str) -> f64 {
    let out = dir.join(format!("{scheme}.csv"));
    let r = sc3(&[
        "solve",
        "--scenario",
        &scenario(scenario_name),
        "--scheme",
        scheme,
        "--out",
        p(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    total_cost(&dir.join(format!("{scheme}.summary.json")))
}

#[test]
fn solve_writes_one_row_per_loop_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let proposed = solve(dir.path(), "two_loops.toml", "proposed");
    let equal = solve(dir.path(), "two_loops.toml", "equal");
    assert!(proposed <= equal, "{proposed} vs {equal}");
    let csv = fs::read_to_string(dir.path().join("proposed.csv")).unwrap();
    assert!(csv.starts_with("# sc3 "));
    assert!(csv.contains("# scenario_digest: "));
    assert_eq!(data_lines(&dir.path().join("proposed.csv")).len(), 2);
}

#[test]
fn closed_form_scheme_is_close_with_adequate_cpu() {
    let dir = tempfile::tempdir().unwrap();
    let proposed = solve(dir.path(), "adequate_cpu.toml", "proposed");
    let closed = solve(dir.path(), "adequate_cpu.toml", "theorem2");
    assert!(proposed <= closed);
    assert!(closed / proposed - 1.0 < 0.01, "{proposed} vs {closed}");
}

#[test]
fn missing_scenario_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let r = sc3(&["solve", "--scenario", "/nonexistent/s.toml", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_scheme_is_rejected() {
    let r = sc3(&[
        "solve",
        "--scenario",
        &scenario("two_loops.toml"),
        "--scheme",
        "best",
        "--out",
        "x.csv",
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn one_point_sweep_reproduces_solve() {
    let dir = tempfile::tempdir().unwrap();
    solve(dir.path(), "two_loops.toml", "proposed");
    let out = dir.path().join("sweep.csv");
    let r = sc3(&[
        "sweep",
        "--scenario",
        &scenario("two_loops.toml"),
        "--param",
        "budget.bandwidth",
        "--from",
        "250kHz",
        "--to",
        "250kHz",
        "--steps",
        "1",
        "--scheme",
        "proposed",
        "--out",
        p(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let swept: Vec<String> = data_lines(&out)
        .into_iter()
        .filter(|l| !l.contains("TOTAL"))
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            fields[2..fields.len() - 1].join(",")
        })
        .collect();
    assert_eq!(swept, data_lines(&dir.path().join("proposed.csv")));
}

#[test]
fn sweep_over_extraction_ratio_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rho.csv");
    let r = sc3(&[
        "sweep",
        "--scenario",
        &scenario("two_loops.toml"),
        "--param",
        "loops.rho",
        "--from",
        "0.005",
        "--to",
        "0.05",
        "--steps",
        "6",
        "--out",
        p(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let totals: Vec<(f64, f64)> = data_lines(&out)
        .iter()
        .filter(|l| l.contains(",TOTAL,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[f.len() - 1], "ok");
            (f[9].parse().unwrap(), f[10].parse().unwrap())
        })
        .collect();
    assert_eq!(totals.len(), 6);
    for w in totals.windows(2) {
        assert!(w[1].0 >= w[0].0, "information fell: {totals:?}");
        assert!(w[1].1 <= w[0].1, "cost rose: {totals:?}");
    }
}

#[test]
fn unknown_sweep_parameter_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let r = sc3(&[
        "sweep",
        "--scenario",
        &scenario("two_loops.toml"),
        "--param",
        "loops.colour",
        "--from",
        "1",
        "--to",
        "2",
        "--steps",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn verify_passes_and_catches_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("verify.json");
    let ok = sc3(&[
        "verify",
        "--scenario",
        &scenario("two_loops.toml"),
        "--grid",
        "24",
        "--out",
        p(&report),
    ]);
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{stdout}");
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"));
    assert!(report.exists());

    let bad = sc3(&[
        "verify",
        "--scenario",
        &scenario("two_loops.toml"),
        "--grid",
        "24",
        "--inject-fault",
    ]);
    assert_eq!(bad.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}

#[test]
fn verify_a_subset_of_a_larger_scenario() {
    let r = sc3(&[
        "verify",
        "--scenario",
        &scenario("reference.toml"),
        "--grid",
        "24",
        "--loops",
        "0",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
}

#[test]
fn reproduce_writes_data_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let r = sc3(&["reproduce", "--figure", "fig5", "--out", p(dir.path())]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
    let checks: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig5.checks.json")).unwrap()).unwrap();
    let checks = checks["result"]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["pass"] == Value::Bool(true)));
    assert!(!data_lines(&dir.path().join("fig5.csv")).is_empty());
}

#[test]
fn repeated_solves_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        assert!(
            sc3(&["solve", "--scenario", &scenario("reference.toml"), "--out", p(out)])
                .status
                .success()
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.summary.json")).unwrap(),
        fs::read(dir.path().join("b.summary.json")).unwrap()
    );
}
