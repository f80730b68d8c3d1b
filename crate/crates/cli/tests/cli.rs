use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const WEIBULL: &str = r#"
[model]
n = 2
family = "weibull"
beta = 3.0
pi = [0.5, 0.5]
lambda = [[-3.0, 0.1], [0.01, -0.1]]

[estimation]
beta0 = 2.0
eta = 1e-4
e_ell = 0.01
seed = 11

[study]
k = 150
horizon = 5.0
delta = 0.1
"#;

fn iphsem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iphsem"))
        .args(args)
        .env_remove("IPHSEM_SEED")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = iphsem(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let bytes = if e.path().is_dir() { Vec::new() } else { fs::read(e.path()).unwrap() };
            (e.file_name().to_string_lossy().into_owned(), bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_fit_gof_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(d, "w.toml", WEIBULL);
    let mut runs = Vec::new();
    for r in 0..2 {
        let out = d.join(format!("run{r}"));
        fs::create_dir(&out).unwrap();
        let panel = out.join("panel.csv");
        let fit = out.join("fit");
        run_ok(&["simulate", "--config", s(&cfg), "--out", s(&panel)]);
        run_ok(&["fit", "--panel", s(&panel), "--config", s(&cfg), "--out", s(&fit), "--beta-trace", "--dump-paths"]);
        run_ok(&[
            "gof", "--panel", s(&panel), "--fit", s(&fit), "--out", s(&out.join("gof.csv")),
            "--ecdf", s(&out.join("ecdf.csv")), "--seed", "5",
        ]);
        runs.push((dir_contents(&out), dir_contents(&fit)));
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].1.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["beta_trace.csv", "paths.csv", "report.txt", "trace.csv"]);
    let top: Vec<&str> = runs[0].0.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(top, ["ecdf.csv", "fit", "gof.csv", "panel.csv", "panel_truth.txt"]);
    let gof = fs::read_to_string(d.join("run0/gof.csv")).unwrap();
    assert!(gof.starts_with("n_observed,n_simulated,d_statistic,p_value\n"));
    let report = fs::read_to_string(d.join("run0/fit/report.txt")).unwrap();
    assert!(report.contains("\nseed=11\n"));
    assert!(report.contains("\n[lambda]\n"));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let no_seed = write_config(d, "n.toml", &WEIBULL.replace("seed = 11\n", ""));
    let truth_seed = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_iphsem"));
        cmd.args(args).env_remove("IPHSEM_SEED");
        if let Some(v) = env {
            cmd.env("IPHSEM_SEED", v);
        }
        assert!(cmd.output().unwrap().status.success());
        let t = fs::read_to_string(d.join("p_truth.txt")).unwrap();
        t.lines().find(|l| l.starts_with("seed=")).unwrap().to_string()
    };
    let p = d.join("p.csv");
    let base = ["simulate", "--config", s(&no_seed), "--out", s(&p)];
    assert_eq!(truth_seed(&base, None), "seed=1");
    assert_eq!(truth_seed(&base, Some("42")), "seed=42");
    let with_cli = [&base[..], &["--seed", "7"]].concat();
    assert_eq!(truth_seed(&with_cli, Some("42")), "seed=7");
    let with_cfg = write_config(d, "c.toml", WEIBULL);
    let cfg_args = ["simulate", "--config", s(&with_cfg), "--out", s(&p)];
    assert_eq!(truth_seed(&cfg_args, Some("42")), "seed=11");
}

#[test]
fn study_is_reproducible_and_has_table_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(d, "w.toml", WEIBULL);
    let a = d.join("a");
    let b = d.join("b");
    for out in [&a, &b] {
        run_ok(&["study", "--name", "weibull", "--config", s(&cfg), "--out", s(out), "--k", "100", "--seed", "3", "4"]);
    }
    assert_eq!(dir_contents(&a), dir_contents(&b));
    let est = fs::read_to_string(a.join("estimators.csv")).unwrap();
    assert_eq!(est.lines().next().unwrap(), "parameter,true_value,estimator,seed");
    assert_eq!(est.lines().count(), 1 + 2 * 5);
}

#[test]
fn zero_paths_gives_header_only_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(d, "w.toml", &WEIBULL.replace("k = 150", "k = 0"));
    let panel = d.join("p.csv");
    let out = iphsem(&["simulate", "--config", s(&cfg), "--out", s(&panel)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("k = 0"));
    assert_eq!(fs::read_to_string(&panel).unwrap(), "path_id,time,state\n");
}

#[test]
fn homogeneous_report_has_no_beta() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(
        d,
        "w.toml",
        &WEIBULL.replace("seed = 11", "seed = 11\nhomog_iterations = 30\nhomog_tail_average = 5"),
    );
    let panel = d.join("p.csv");
    let fit = d.join("fit");
    run_ok(&["simulate", "--config", s(&cfg), "--out", s(&panel)]);
    run_ok(&["fit", "--panel", s(&panel), "--config", s(&cfg), "--out", s(&fit), "--homogeneous"]);
    let report = fs::read_to_string(fit.join("report.txt")).unwrap();
    assert!(report.contains("family=homogeneous\n"));
    assert!(report.contains("termination=fixed_iterations\n"));
    assert!(!report.lines().any(|l| l.starts_with("beta")));
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(d, "w.toml", WEIBULL);

    let corrupt = write_config(d, "bad.csv", "path_id,time,state\np1,0,1\np1,0,2\n");
    let out = iphsem(&["fit", "--panel", s(&corrupt), "--config", s(&cfg), "--out", s(&d.join("f"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let bad_cfg = write_config(d, "bad.toml", &WEIBULL.replace("eta = 1e-4", "eta = 0"));
    let out = iphsem(&["simulate", "--config", s(&bad_cfg), "--out", s(&d.join("p.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = iphsem(&["study", "--name", "nope", "--config", s(&cfg), "--out", s(&d.join("s"))]);
    assert_eq!(out.status.code(), Some(2));

    // one SEM iteration cannot satisfy the single-update rule from beta0 = 2
    let panel = d.join("p.csv");
    run_ok(&["simulate", "--config", s(&cfg), "--out", s(&panel)]);
    let short = write_config(d, "short.toml", &WEIBULL.replace("seed = 11", "seed = 11\nmax_sem_iterations = 1"));
    let fit = d.join("short");
    let out = iphsem(&["fit", "--panel", s(&panel), "--config", s(&short), "--out", s(&fit)]);
    assert_eq!(out.status.code(), Some(3));
    let report = fs::read_to_string(fit.join("report.txt")).unwrap();
    assert!(report.contains("termination=max_iterations\n"));

    // state 2 is censored and never leaves, so absorption is unreachable
    let stuck = write_config(d, "stuck.csv", "path_id,time,state\na,0,1\na,1,3\nb,0,2\nb,1,2\n");
    let out = iphsem(&["fit", "--panel", s(&stuck), "--config", s(&cfg), "--out", s(&d.join("g"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gof_without_absorbed_paths_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write_config(d, "w.toml", WEIBULL);
    let panel = d.join("p.csv");
    let fit = d.join("fit");
    run_ok(&["simulate", "--config", s(&cfg), "--out", s(&panel)]);
    run_ok(&["fit", "--panel", s(&panel), "--config", s(&cfg), "--out", s(&fit)]);
    let censored = write_config(d, "c.csv", "path_id,time,state\na,0,1\na,1,2\n");
    let out = iphsem(&["gof", "--panel", s(&censored), "--fit", s(&fit), "--out", s(&d.join("g.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let samples = write_config(d, "t.csv", "time\n0.5\n0.7\n1.25\n");
    run_ok(&["gof", "--samples", s(&samples), "--fit", s(&fit), "--out", s(&d.join("g.csv"))]);
}
