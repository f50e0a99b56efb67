use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ordfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordfactor")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONDITION: &str = r#"
shape = "sparse"
n_categories = 4
n_respondents = 40
n_sparse_items = 2
seed = 5
"#;

/// Simulates a dataset into `dir/sim` and returns the generated fit config
/// with a short single-chain sampler.
fn simulated_fit_config(dir: &Path) -> String {
    let cond = dir.join("cond.toml");
    fs::write(&cond, CONDITION).unwrap();
    let sim = dir.join("sim");
    let o = ordfactor(&["simulate", "--condition", cond.to_str().unwrap(), "--out", sim.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(sim.join("fit.toml")).unwrap();
    text.replace("n_chains = 4", "n_chains = 1")
        .replace("iterations = 2000", "iterations = 60")
        .replace("warmup = 1000", "warmup = 30")
        .replace("max_depth = 10", "max_depth = 4")
}

#[test]
fn prior_solve_prints_second_component() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("targets.toml");
    fs::write(&t, "mean = [-2.00, -0.25]\nvariance = [0.20, 0.25]\n").unwrap();
    let o = ordfactor(&["prior-solve", "--targets", t.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Normal(0.55, 0.02)"), "{out}");
    assert!(out.contains("Normal(-2.00, 0.20)"), "{out}");
}

#[test]
fn prior_solve_rejects_infeasible_targets() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("targets.toml");
    fs::write(&t, "mean = [0.0, -1.0]\nvariance = [0.2, 0.3]\n").unwrap();
    let o = ordfactor(&["prior-solve", "--targets", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("must exceed"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let o = ordfactor(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(ordfactor(&[]).status.code(), Some(1));
    let o = ordfactor(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("prior-predict"));
}

#[test]
fn missing_config_is_a_config_error() {
    let o = ordfactor(&["fit", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cond = dir.path().join("cond.toml");
    fs::write(&cond, CONDITION).unwrap();
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = ordfactor(&["simulate", "--condition", cond.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        files.push((fs::read(out.join("data.csv")).unwrap(), fs::read(out.join("truth.json")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let data = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(data.starts_with("# ordfactor "));
    assert!(data.contains("seed=5 config_sha256="));
}

#[test]
fn fit_keeps_declared_categories_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim").join("short.toml");
    fs::write(&cfg, simulated_fit_config(dir.path())).unwrap();
    let o = ordfactor(&["fit", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    // the category table lists the unobserved bottom category of item_1
    let table = stdout(&o);
    let row = table.lines().find(|l| l.starts_with("item_1 ")).unwrap();
    assert_eq!(row.split_whitespace().nth(1), Some("0"), "{table}");

    let out = dir.path().join("sim").join("fit");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# ordfactor "));
    let item1: Vec<&str> = summary.lines().filter(|l| l.starts_with("tau.item_1.")).collect();
    assert_eq!(item1.len(), 3, "{summary}");
    let draws = fs::read_to_string(out.join("draws.csv")).unwrap();
    let mut lines = draws.lines().skip(1);
    assert!(lines.next().unwrap().starts_with("chain,iteration,divergent,"));
    assert_eq!(lines.count(), 30);
}

#[test]
fn malformed_csv_cites_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let text = simulated_fit_config(dir.path());
    let sim = dir.path().join("sim");
    let data = fs::read_to_string(sim.join("data.csv")).unwrap();
    let mut lines: Vec<String> = data.lines().map(String::from).collect();
    // header is line 1 after the provenance comment; corrupt data row 2, first column
    let mut cells: Vec<&str> = lines[3].split(',').collect();
    cells[0] = "0";
    lines[3] = cells.join(",");
    fs::write(sim.join("bad.csv"), lines.join("\n")).unwrap();
    let cfg = sim.join("bad.toml");
    fs::write(&cfg, text.replace("data = \"data.csv\"", "data = \"bad.csv\"")).unwrap();
    let o = ordfactor(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("row 2") && err.contains("item_1"), "{err}");
}

#[test]
fn failed_initialization_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = simulated_fit_config(dir.path())
        .replace("init_radius = 2.0", "init_radius = 1000000.0")
        .replace("max_init_attempts = 100", "max_init_attempts = 1");
    let cfg = dir.path().join("sim").join("abort.toml");
    fs::write(&cfg, text).unwrap();
    let o = ordfactor(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("sampler failed"));
}

#[test]
fn prior_predict_writes_labelled_draws() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("prior.toml");
    fs::write(
        &p,
        r#"
n_categories = 4
seed = 3
[[priors]]
label = "intended"
thresholds = { family = "sequential", mean = [-2.0, -0.2, 1.0], dispersion = 0.2 }
[[priors]]
label = "joint"
thresholds = { family = "induced-dirichlet", alpha = [10, 50, 50, 10] }
"#,
    )
    .unwrap();
    let out = dir.path().join("draws.csv");
    let o = ordfactor(&["prior-predict", "--prior", p.to_str().unwrap(), "--draws", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next(), Some("prior,draw,tau_1,tau_2,tau_3"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1000);
    assert_eq!(rows.iter().filter(|r| r.starts_with("joint,")).count(), 500);
}

#[test]
fn mc_study_writes_results_directory() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        r#"
replications = 1
base_seed = 9
workers = 1
[[cells]]
shape = "sparse"
n_categories = 4
n_respondents = 30
n_sparse_items = 2
[[priors]]
label = "joint"
thresholds = { family = "induced-dirichlet" }
[sampler]
n_chains = 2
iterations = 40
warmup = 20
algorithm = { kind = "nuts", max_depth = 3 }
"#,
    )
    .unwrap();
    let out = dir.path().join("results");
    let o = ordfactor(&["mc-study", "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["records.csv", "fits.csv", "cells.csv", "tables.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(stdout(&o).contains("Sparse (2), C=4, N=30"));
}
