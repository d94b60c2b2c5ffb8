//! End-to-end tests of the `aidfx` binary: exit codes, report emission
//! and determinism of the run subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").canonicalize().unwrap()
}

fn aidfx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aidfx")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, area: &str, methods: &str, matching_k: usize) -> PathBuf {
    let fixtures = fixtures_dir();
    let text = format!(
        r#"
seed = 7
dag = "{fixtures}/somalia.dag"
area = "{area}"
period = "annual"
thresholds = [50.0]
methods = {methods}
bootstrap = 100
trials = 20
matching_k = {matching_k}

[columns]
district = "district"
date = "date"
population = "Population"
per_capita = ["Cash", "Fatalities", "Displacement", "SorghumProduction"]

[columns.aggregators]
Cash = "sum"
Fatalities = "sum"
Displacement = "sum"
SorghumProduction = "sum"
Population = "last"

[[sources]]
path = "{fixtures}/somalia_monthly.csv"
columns = ["ENSO", "SPI", "Fatalities", "SorghumProduction", "Displacement", "MarketPrices", "Population", "Cash", "GAM"]
"#,
        fixtures = fixtures.display(),
    );
    let path = dir.join("study.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn dag_check_prints_adjustment_set() {
    let dag = fixtures_dir().join("somalia.dag");
    let out = aidfx(&["dag", "check", dag.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(
        "{Displacement, Fatalities, MarketPrices, Population, SorghumProduction}"
    ));
    assert!(text.contains("backdoor criterion: satisfied"));
}

#[test]
fn dag_check_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dag");
    std::fs::write(&bad, "this is not a dag\n").unwrap();
    let out = aidfx(&["dag", "check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_benchmark_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = aidfx(&[
        "synth", "--spec", "confounded-linear", "--n", "50", "--seed", "3", "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 51); // header + 50 rows
    assert!(text.lines().next().unwrap().contains("T"));
}

#[test]
fn run_emits_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "country", r#"["lr"]"#, 1);
    let out_dir = dir.path().join("out");
    let out = aidfx(&[
        "run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
        "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(json.contains("\"rows_harmonized\": 399"));
}

#[test]
fn run_is_byte_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "country", r#"["lr"]"#, 1);
    let mut reports = Vec::new();
    for (sub, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let out_dir = dir.path().join(sub);
        let out = aidfx(&[
            "run", "--config", config.to_str().unwrap(), "--seed", seed, "--out",
            out_dir.to_str().unwrap(), "--format", "csv",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(out_dir.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_ne!(reports[0], reports[2]);
}

#[test]
fn run_exits_two_on_partial_grid() {
    let dir = tempfile::tempdir().unwrap();
    // a matching k far beyond the sample size makes that cell inestimable
    let config = write_config(dir.path(), "country", r#"["lr", "matching"]"#, 100000);
    let out_dir = dir.path().join("out");
    let out = aidfx(&[
        "run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
        "--format", "text",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(text.contains("inestimable"));
}

#[test]
fn run_exits_one_on_fatal_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "Atlantis", r#"["lr"]"#, 1);
    let out = aidfx(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Atlantis"));
}
