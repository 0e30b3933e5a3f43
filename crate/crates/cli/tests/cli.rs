use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use ergoport::config::ExperimentConfig;
use ergoport::io::{read_policy_csv, write_policy_csv};
use ergoport_core::{solve_ergodic, Problem, SimplexGrid};
use serde_json::Value;

const SMALL: &str = r#"
gamma = -0.5

[model]
kind = "discrete"
outcomes = [[1.5, 0.5], [0.6, 1.8]]
probabilities = [0.5, 0.5]

[costs]
buy = [0.1, 0.2]
sell = [0.2, 0.1]

[grid]
step = 0.05

[solver]
refine = false

[evaluation]
horizon = 50
n_paths = 200
seed = 3
bootstrap = 20

[simulate]
horizon = 300
seed = 5

[[strategy]]
kind = "buy-and-hold"
name = "Buy-and-hold asset 1"
asset = 1

[[strategy]]
kind = "buy-and-hold"
name = "Buy-and-hold asset 2"
asset = 2

[[strategy]]
kind = "fixed-mix"
name = "Half and half"
weights = [0.5, 0.5]

[[strategy]]
kind = "bellman"
name = "Risk-sensitive"
"#;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples_cfg").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergoport")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_artifacts_and_echoes_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = run_in(tmp.path(), "solve", &cfg, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["value.csv", "policy.csv", "report.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let rep = report(tmp.path());
    assert_eq!(rep["solve"]["converged"], true);
    assert_eq!(rep["solve"]["grid_points"], 21);
    // Defaults are filled into the echo.
    assert_eq!(rep["config"]["solver"]["tol"], 1e-6);
    assert_eq!(rep["config"]["evaluation"]["snap"], 1e-3);
    assert!(rep["solve"]["residual_span"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn policy_csv_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out = run_in(tmp.path(), "solve", &cfg_path, &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let sc = cfg.scenarios().unwrap();
    let sched = cfg.schedule().unwrap();
    let grid = Arc::new(SimplexGrid::new(2, cfg.grid.step).unwrap());
    let problem = Problem::new(&sc, cfg.risk(), &sched).unwrap();
    let rep = solve_ergodic(&problem, grid.clone(), &cfg.search(), cfg.stop_rule()).unwrap();

    let from_binary = read_policy_csv(&tmp.path().join("policy.csv"), grid.clone()).unwrap();
    assert_eq!(from_binary, rep.policy);
    let again = tmp.path().join("again.csv");
    write_policy_csv(&again, &from_binary).unwrap();
    assert_eq!(read_policy_csv(&again, grid).unwrap(), rep.policy);
}

#[test]
fn bundled_example1_uses_eight_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "solve", &bundled("example1.toml"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(report(tmp.path())["solve"]["iterations"], 8);

    let out = run_in(tmp.path(), "region", &bundled("example1.toml"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let region: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("region.json")).unwrap()).unwrap();
    let lo = region["lower"][0].as_f64().unwrap();
    let hi = region["upper"][0].as_f64().unwrap();
    assert!((lo - 0.38).abs() <= 0.03 && (hi - 0.75).abs() <= 0.03, "[{lo}, {hi}]");
}

#[test]
fn bundled_example2_grid_and_markowitz() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "markowitz", &bundled("example2.toml"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mk: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("markowitz.json")).unwrap()).unwrap();
    for (got, want) in mk["weights"].as_array().unwrap().iter().zip([0.37054, 0.40179, 0.22768]) {
        assert!((got.as_f64().unwrap() - want).abs() <= 1e-4);
    }

    let out = run_in(tmp.path(), "solve", &bundled("example2.toml"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rep = report(tmp.path());
    assert_eq!(rep["solve"]["iterations"], 5);
    assert_eq!(rep["solve"]["grid_points"], 1326);
    assert!(rep["markowitz"].is_object(), "earlier sections are kept");
}

#[test]
fn evaluate_is_deterministic_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert!(run_in(tmp.path(), "solve", &cfg, &[]).status.success());
    let out = run_in(tmp.path(), "evaluate", &cfg, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let first = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert_eq!(first.lines().count(), 5);
    assert!(first.starts_with("strategy,mean,std,taylor,entropy"));
    assert!(std::fs::read_to_string(tmp.path().join("metrics.txt")).unwrap().contains("Risk-sensitive"));

    let out = run_in(tmp.path(), "evaluate", &cfg, &["--threads", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap(), first);

    let out = run_in(tmp.path(), "evaluate", &cfg, &["--seed", "4"]);
    assert!(out.status.success());
    assert_ne!(std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap(), first);
    assert_eq!(report(tmp.path())["config"]["evaluation"]["seed"], 4);
}

#[test]
fn simulate_shares_one_return_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert!(run_in(tmp.path(), "solve", &cfg, &[]).status.success());
    let out = run_in(tmp.path(), "simulate", &cfg, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let slugs = ["buy_and_hold_asset_1", "buy_and_hold_asset_2", "half_and_half", "risk_sensitive"];
    let returns: Vec<Vec<String>> = slugs
        .iter()
        .map(|s| {
            let text = std::fs::read_to_string(tmp.path().join(format!("path_{s}.csv"))).unwrap();
            text.lines().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect()
        })
        .collect();
    assert_eq!(returns[0].len(), 301);
    assert!(returns.iter().all(|r| r == &returns[0]));

    let before = std::fs::read_to_string(tmp.path().join("path_risk_sensitive.csv")).unwrap();
    assert!(run_in(tmp.path(), "simulate", &cfg, &[]).status.success());
    assert_eq!(std::fs::read_to_string(tmp.path().join("path_risk_sensitive.csv")).unwrap(), before);
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();

    let cfg = write_config(tmp.path(), &SMALL.replace("[grid]", "[grid]\nstpe = 0.1"));
    let out = run_in(tmp.path(), "solve", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stpe"), "{}", stderr(&out));

    let no_costs = SMALL.replace("[costs]\nbuy = [0.1, 0.2]\nsell = [0.2, 0.1]\n", "");
    let cfg = write_config(tmp.path(), &no_costs);
    let out = run_in(tmp.path(), "solve", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("costs"), "{}", stderr(&out));

    let cfg = write_config(tmp.path(), SMALL.split("[[strategy]]").next().unwrap());
    let out = run_in(tmp.path(), "evaluate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("strategy"));

    let cfg = write_config(tmp.path(), &SMALL.replace("horizon = 300", "horizon = 0"));
    assert_eq!(run_in(tmp.path(), "simulate", &cfg, &[]).status.code(), Some(2));

    let cfg = write_config(tmp.path(), SMALL);
    assert!(run_in(tmp.path(), "solve", &cfg, &[]).status.success());
    assert_eq!(run_in(tmp.path(), "region", &cfg, &["--eta", "0"]).status.code(), Some(2));
    assert_eq!(run_in(tmp.path(), "region", &cfg, &["--eta", "-1"]).status.code(), Some(2));
}

#[test]
fn malformed_policy_reports_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    assert!(run_in(tmp.path(), "solve", &cfg, &[]).status.success());
    let path = tmp.path().join("policy.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = "0.15,0.85,abc,0.5".into();
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = run_in(tmp.path(), "region", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 5"), "{}", stderr(&out));
}

#[test]
fn non_convergence_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("refine = false", "refine = false\nmax_iter = 2"));
    let out = run_in(tmp.path(), "solve", &cfg, &["--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(tmp.path().join("policy.csv").exists());
    assert_eq!(report(tmp.path())["solve"]["converged"], false);
}

#[test]
fn io_errors_exit_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(run_in(tmp.path(), "solve", &missing, &[]).status.code(), Some(4));

    // Bellman strategy without a solved policy.
    let fresh = tmp.path().join("fresh");
    assert_eq!(run_in(&fresh, "evaluate", &cfg, &[]).status.code(), Some(4));

    // Output directory is a regular file.
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run_in(&blocker, "markowitz", &cfg, &[]).status.code(), Some(4));
}
