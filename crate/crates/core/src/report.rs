//! Run reports and plot-data CSVs.
//!
//! A fit report is a `key=value` header followed by CSV blocks introduced by
//! `[pi]`, `[lambda]` and `[trace]` lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generator::{InitialDistribution, SubIntensityMatrix};
use crate::gof::{KsResult, SampleSet};
use crate::io::{fmt_f64, generator_to_csv, parse_rows, write_atomic};
use crate::model::TimeScaledModel;
use crate::scaling::{FamilyKind, ScalingFamily};
use crate::sem::{FitConfig, FitResult};
use crate::sim::ContinuousPath;

pub const REPORT_FILE: &str = "report.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const BETA_TRACE_FILE: &str = "beta_trace.csv";
pub const PATHS_FILE: &str = "paths.csv";

fn lambda_columns(n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(n * n);
    for x in 1..=n {
        for y in 1..=n {
            cols.push(format!("lambda_{x}{y}"));
        }
    }
    cols
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// Per-iteration trace CSV.
pub fn trace_csv(fit: &FitResult, absorbed_paths: usize) -> String {
    let n = fit.lambda_hat.n();
    let mut out = String::new();
    let mut header: Vec<String> = ["iteration", "beta", "gd_updates", "bridge_attempts", "absorbed_paths"]
        .map(String::from)
        .to_vec();
    header.extend(lambda_columns(n));
    push_row(&mut out, &header);
    for r in &fit.trace {
        let mut row = vec![
            r.iteration.to_string(),
            r.beta.map(fmt_f64).unwrap_or_default(),
            r.gd_updates.to_string(),
            r.bridge_attempts.to_string(),
            absorbed_paths.to_string(),
        ];
        row.extend(r.lambda.to_rows().into_iter().flatten().map(fmt_f64));
        push_row(&mut out, &row);
    }
    out
}

/// Every gradient-ascent step of every β refinement; iteration 0 is the
/// initialization.
pub fn beta_trace_csv(fit: &FitResult) -> String {
    let mut out = String::from("iteration,step,beta,loglik,gradient\n");
    for (i, steps) in fit.beta_trace.iter().enumerate() {
        for s in steps {
            let _ = writeln!(
                out,
                "{i},{},{},{},{}",
                s.step,
                fmt_f64(s.beta),
                fmt_f64(s.loglik),
                fmt_f64(s.gradient)
            );
        }
    }
    out
}

pub fn paths_csv(paths: &[ContinuousPath]) -> String {
    let mut out = String::from("path_id,epoch,state,timeline\n");
    for (id, p) in paths.iter().enumerate() {
        for (t, s) in p.times.iter().zip(&p.states) {
            let _ = writeln!(out, "{id},{},{},{}", fmt_f64(*t), s.number(), p.timeline.tag());
        }
    }
    out
}

pub fn fit_report(fit: &FitResult, config: &FitConfig, k: usize, absorbed_paths: usize) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("family", fit.family.name().to_string());
    kv("n", fit.lambda_hat.n().to_string());
    kv("seed", config.seed.to_string());
    kv("paths", k.to_string());
    kv("absorbed_paths", absorbed_paths.to_string());
    if fit.family != FamilyKind::Identity {
        kv("beta0", fmt_f64(config.beta0));
        kv("eta", fmt_f64(config.gd.eta));
        kv("e_ell", fmt_f64(config.gd.e_ell));
        kv("beta_min", fmt_f64(config.gd.beta_min));
        kv("max_sem_iterations", config.max_iterations.to_string());
        kv("max_gd_steps", config.gd.max_steps.to_string());
    } else {
        kv("homog_iterations", config.homogeneous_iterations.to_string());
        kv("homog_tail_average", config.homogeneous_tail.to_string());
    }
    kv("max_bridge_attempts", config.max_bridge_attempts.to_string());
    kv("termination", fit.termination.tag().to_string());
    kv("iterations_used", fit.iterations_used.to_string());
    if let Some(b) = fit.beta_hat {
        kv("beta", fmt_f64(b));
    }
    for w in &fit.warnings {
        kv("warning", w.replace('\n', " "));
    }
    out.push_str("\n[pi]\n");
    push_row(&mut out, &fit.pi_hat.to_vec().into_iter().map(fmt_f64).collect::<Vec<_>>());
    out.push_str("\n[lambda]\n");
    out.push_str(&generator_to_csv(&fit.lambda_hat));
    out.push_str("\n[trace]\n");
    out.push_str(&trace_csv(fit, absorbed_paths));
    out
}

/// Report for a known model, written next to simulated data.
pub fn truth_report(model: &TimeScaledModel, seed: u64, k: usize, horizon: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "family={}", model.family.kind().name());
    let _ = writeln!(out, "n={}", model.n());
    let _ = writeln!(out, "seed={seed}");
    let _ = writeln!(out, "paths={k}");
    let _ = writeln!(out, "horizon={}", fmt_f64(horizon));
    if model.family.kind() != FamilyKind::Identity {
        let _ = writeln!(out, "beta={}", fmt_f64(model.family.beta()));
    }
    out.push_str("\n[pi]\n");
    push_row(&mut out, &model.pi.to_vec().into_iter().map(fmt_f64).collect::<Vec<_>>());
    out.push_str("\n[lambda]\n");
    out.push_str(&generator_to_csv(&model.lambda));
    out
}

/// Writes `report.txt` and `trace.csv` into `dir`, plus the β trace and
/// completed paths when present.
pub fn write_fit_dir(
    dir: &Path,
    fit: &FitResult,
    config: &FitConfig,
    k: usize,
    absorbed_paths: usize,
    beta_trace: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join(REPORT_FILE), fit_report(fit, config, k, absorbed_paths).as_bytes())?;
    write_atomic(&dir.join(TRACE_FILE), trace_csv(fit, absorbed_paths).as_bytes())?;
    if beta_trace && !fit.beta_trace.is_empty() {
        write_atomic(&dir.join(BETA_TRACE_FILE), beta_trace_csv(fit).as_bytes())?;
    }
    if let Some(paths) = &fit.completed_paths {
        write_atomic(&dir.join(PATHS_FILE), paths_csv(paths).as_bytes())?;
    }
    Ok(())
}

/// The parts of a report needed to rebuild the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub entries: Vec<(String, String)>,
    pub model: TimeScaledModel,
}

impl ParsedReport {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn block_end(lines: &[&str], start: usize) -> usize {
    (start..lines.len())
        .find(|&i| lines[i].trim_start().starts_with('['))
        .unwrap_or(lines.len())
}

/// Parses a fit or truth report.
pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let lines: Vec<&str> = text.lines().collect();
    let mut entries = Vec::new();
    let mut i = 0;
    while i < lines.len() && !lines[i].trim_start().starts_with('[') {
        let line = lines[i].trim();
        if !line.is_empty() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::input(i + 1, format!("expected key=value, got '{line}'")))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        i += 1;
    }
    let mut pi = None;
    let mut lambda = None;
    while i < lines.len() {
        let name = lines[i].trim();
        let end = block_end(&lines, i + 1);
        let body = lines[i + 1..end].join("\n");
        match name {
            "[pi]" => pi = Some(parse_rows(&body, i + 2)?),
            "[lambda]" => lambda = Some(parse_rows(&body, i + 2)?),
            _ => {}
        }
        i = end;
    }
    let find = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, v): &(String, String)| v.clone());
    let missing = |what: &str| Error::Input {
        line: None,
        message: format!("report has no {what}"),
    };
    let kind: FamilyKind = find("family")
        .ok_or_else(|| missing("family"))?
        .parse()
        .map_err(|e: Error| Error::Input {
            line: None,
            message: e.to_string(),
        })?;
    let family = if kind == FamilyKind::Identity {
        ScalingFamily::identity()
    } else {
        let beta: f64 = find("beta")
            .ok_or_else(|| missing("beta"))?
            .parse()
            .map_err(|_| missing("numeric beta"))?;
        ScalingFamily::new(kind, beta)?
    };
    let pi = pi.ok_or_else(|| missing("[pi] block"))?;
    if pi.len() != 1 {
        return Err(missing("single-row [pi] block"));
    }
    let rows = lambda.ok_or_else(|| missing("[lambda] block"))?;
    let model = TimeScaledModel::new(
        family,
        InitialDistribution::new(pi.into_iter().next().unwrap())?,
        SubIntensityMatrix::from_rows(&rows)?,
    )?;
    Ok(ParsedReport { entries, model })
}

/// Reads `report.txt` from a directory, or the file itself.
pub fn read_report(path: &Path) -> Result<ParsedReport> {
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::Input {
        line: None,
        message: format!("cannot read {}: {e}", file.display()),
    })?;
    parse_report(&text)
}

pub fn gof_csv(r: &KsResult) -> String {
    format!(
        "n_observed,n_simulated,d_statistic,p_value\n{},{},{},{}\n",
        r.n_a,
        r.n_b,
        fmt_f64(r.statistic),
        fmt_f64(r.p_value)
    )
}

/// Both ECDFs evaluated on the merged sample points.
pub fn ecdf_csv(observed: &SampleSet, simulated: &SampleSet) -> String {
    let mut grid: Vec<f64> = observed.values().iter().chain(simulated.values()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut out = String::from("time,ecdf_observed,ecdf_simulated\n");
    for t in grid {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(t),
            fmt_f64(observed.ecdf(t)),
            fmt_f64(simulated.ecdf(t))
        );
    }
    out
}

/// Fitted and true densities on a regular grid over `(0, upper]`.
pub fn density_csv(fitted: &TimeScaledModel, truth: &TimeScaledModel, upper: f64, points: usize) -> Result<String> {
    let mut out = String::from("time,density_fitted,density_true\n");
    for i in 1..=points {
        let t = upper * i as f64 / points as f64;
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(t),
            fmt_f64(fitted.density(t)?),
            fmt_f64(truth.density(t)?)
        );
    }
    Ok(out)
}
