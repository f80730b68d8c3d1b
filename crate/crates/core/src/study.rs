//! Simulation studies: simulate from a known model, observe on a grid, fit,
//! and compare absorption-time distributions.

use std::fmt::Write as _;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gof::{ks_two_sample, KsResult, SampleSet};
use crate::io::{fmt_f64, write_atomic};
use crate::model::TimeScaledModel;
use crate::panel::PanelObservationSet;
use crate::report::{density_csv, ecdf_csv, trace_csv};
use crate::scaling::FamilyKind;
use crate::sem::{fit, FitConfig, FitResult};
use crate::sim::{discretize, ContinuousPath, Purpose, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// fits at several horizons with shrinking absorption counts
    Gompertz,
    /// parameter recovery at a single horizon
    Weibull,
    /// time-scaled against homogeneous fit on a held-out half
    Comparison,
}

impl std::str::FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gompertz" => Ok(StudyKind::Gompertz),
            "weibull" => Ok(StudyKind::Weibull),
            "comparison" => Ok(StudyKind::Comparison),
            other => Err(Error::Config(format!(
                "unknown study '{other}' (expected gompertz, weibull or comparison)"
            ))),
        }
    }
}

/// `k` paths of `model`, each run to absorption. Path `i` uses its own
/// substream, so a prefix of a larger run is identical to a smaller run.
pub fn simulate_paths(model: &TimeScaledModel, k: usize, seed: u64) -> Result<Vec<ContinuousPath>> {
    let stream = RandomStream::new(seed);
    (0..k as u64)
        .into_par_iter()
        .map(|i| model.simulate(&stream, Purpose::Simulate, i, f64::INFINITY))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `k` paths run to the end of `grid` and observed on it.
pub fn simulate_panel(model: &TimeScaledModel, k: usize, grid: &[f64], seed: u64) -> Result<PanelObservationSet> {
    let horizon = *grid
        .last()
        .ok_or_else(|| Error::Domain("observation grid is empty".into()))?;
    let stream = RandomStream::new(seed);
    let paths = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            model
                .simulate(&stream, Purpose::Simulate, i, horizon)
                .and_then(|p| discretize(&p, grid, i.to_string()))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    PanelObservationSet::new(model.n(), paths)
}

/// Observes `paths` on `grid`; path ids are their indices.
pub fn observe(paths: &[(usize, &ContinuousPath)], grid: &[f64], n: usize) -> Result<PanelObservationSet> {
    let panel = paths
        .iter()
        .map(|(i, p)| discretize(p, grid, i.to_string()))
        .collect::<Result<Vec<_>>>()?;
    PanelObservationSet::new(n, panel)
}

/// Exact absorption times of the paths absorbed by `horizon`.
pub fn absorbed_by<'a>(paths: impl IntoIterator<Item = &'a ContinuousPath>, horizon: f64) -> Vec<f64> {
    paths
        .into_iter()
        .filter_map(|p| p.absorption_time().filter(|&t| t <= horizon))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GofComparison {
    pub ks: KsResult,
    pub observed: SampleSet,
    pub simulated: SampleSet,
}

/// Two-sample test of `observed` against as many absorption times drawn
/// from `model`.
pub fn compare_with_model(model: &TimeScaledModel, observed: Vec<f64>, seed: u64) -> Result<GofComparison> {
    if observed.is_empty() {
        return Err(Error::Domain("no absorbed paths to compare".into()));
    }
    let stream = RandomStream::new(seed);
    let simulated = model.sample_absorption_times(&stream, Purpose::GoodnessOfFit, observed.len())?;
    let observed = SampleSet::new(observed)?;
    let simulated = SampleSet::new(simulated)?;
    let ks = ks_two_sample(&observed, &simulated)?;
    Ok(GofComparison { ks, observed, simulated })
}

pub fn fitted_model(fit: &FitResult) -> Result<TimeScaledModel> {
    TimeScaledModel::new(fit.scaling(), fit.pi_hat.clone(), fit.lambda_hat.clone())
}

#[derive(Debug, Clone)]
pub struct HorizonRun {
    pub horizon: f64,
    pub seed: u64,
    pub absorbed_paths: usize,
    pub fit: FitResult,
    pub gof: GofComparison,
}

fn run_horizon(
    config: &RunConfig,
    truth: &TimeScaledModel,
    paths: &[ContinuousPath],
    horizon: f64,
    seed: u64,
) -> Result<HorizonRun> {
    let grid = config.grid(horizon)?;
    let indexed: Vec<(usize, &ContinuousPath)> = paths.iter().enumerate().collect();
    let panel = observe(&indexed, &grid, truth.n())?;
    let absorbed_paths = panel.absorbed_count();
    let fit_config = config.fit_config(seed)?;
    let fit = fit(&panel, &fit_config)?;
    let gof = compare_with_model(&fitted_model(&fit)?, absorbed_by(paths, horizon), seed)?;
    info!(
        "seed {seed}, T = {horizon}: {absorbed_paths} absorbed, {} iterations, p = {}",
        fit.iterations_used, gof.ks.p_value
    );
    Ok(HorizonRun {
        horizon,
        seed,
        absorbed_paths,
        fit,
        gof,
    })
}

/// One fit per (seed, horizon); each seed simulates its paths once and
/// observes them up to every horizon.
pub fn horizon_study(config: &RunConfig, seeds: &[u64]) -> Result<Vec<HorizonRun>> {
    let study = config.study()?;
    let truth = config.truth()?;
    let horizons = study.horizons.clone().unwrap_or_else(|| vec![study.horizon]);
    let mut runs = Vec::new();
    for &seed in seeds {
        let paths = simulate_paths(&truth, study.k, seed)?;
        for &t in &horizons {
            runs.push(run_horizon(config, &truth, &paths, t, seed)?);
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub seed: u64,
    pub train_paths: usize,
    pub test_absorbed: usize,
    pub scaled: FitResult,
    pub homogeneous: FitResult,
    pub scaled_gof: GofComparison,
    pub homogeneous_gof: GofComparison,
}

/// Fits both models on a random half of the simulated panel and tests each
/// against the held-out half's absorption times.
pub fn comparison_study(config: &RunConfig, seeds: &[u64]) -> Result<Vec<ComparisonRun>> {
    let study = config.study()?;
    let truth = config.truth()?;
    let grid = config.grid(study.horizon)?;
    let mut runs = Vec::new();
    for &seed in seeds {
        let paths = simulate_paths(&truth, study.k, seed)?;
        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.shuffle(&mut RandomStream::new(seed).substream(Purpose::Split, 0, 0, 0));
        let (train, test) = order.split_at(paths.len() / 2);
        let mut train: Vec<usize> = train.to_vec();
        train.sort_unstable();
        let indexed: Vec<(usize, &ContinuousPath)> = train.iter().map(|&i| (i, &paths[i])).collect();
        let panel = observe(&indexed, &grid, truth.n())?;
        let held_out = absorbed_by(test.iter().map(|&i| &paths[i]), study.horizon);

        let scaled_cfg = FitConfig {
            family: truth.family.kind(),
            ..config.fit_config(seed)?
        };
        let homog_cfg = FitConfig {
            family: FamilyKind::Identity,
            ..scaled_cfg.clone()
        };
        let scaled = fit(&panel, &scaled_cfg)?;
        let homogeneous = fit(&panel, &homog_cfg)?;
        let scaled_gof = compare_with_model(&fitted_model(&scaled)?, held_out.clone(), seed)?;
        let homogeneous_gof = compare_with_model(&fitted_model(&homogeneous)?, held_out.clone(), seed)?;
        info!(
            "seed {seed}: time-scaled p = {}, homogeneous p = {}",
            scaled_gof.ks.p_value, homogeneous_gof.ks.p_value
        );
        runs.push(ComparisonRun {
            seed,
            train_paths: panel.len(),
            test_absorbed: held_out.len(),
            scaled,
            homogeneous,
            scaled_gof,
            homogeneous_gof,
        });
    }
    Ok(runs)
}

fn lambda_header(n: usize) -> String {
    (1..=n)
        .flat_map(|x| (1..=n).map(move |y| format!("lambda_{x}{y}")))
        .collect::<Vec<_>>()
        .join(",")
}

fn lambda_cells(m: &crate::generator::SubIntensityMatrix) -> String {
    m.to_rows()
        .into_iter()
        .flatten()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(",")
}

/// Estimates per horizon, with the true parameters as a final row.
pub fn parameter_table(runs: &[HorizonRun], truth: &TimeScaledModel) -> String {
    let mut out = format!("T,beta_hat,{},seed\n", lambda_header(truth.n()));
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.horizon),
            r.fit.beta_hat.map(fmt_f64).unwrap_or_default(),
            lambda_cells(&r.fit.lambda_hat),
            r.seed
        );
    }
    let _ = writeln!(out, "true,{},{},", fmt_f64(truth.family.beta()), lambda_cells(&truth.lambda));
    out
}

pub fn gof_table(runs: &[HorizonRun]) -> String {
    let mut out = String::from("T,absorbed_paths,iteration,p_value,seed\n");
    for r in runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.horizon),
            r.absorbed_paths,
            r.fit.iterations_used,
            fmt_f64(r.gof.ks.p_value),
            r.seed
        );
    }
    out
}

/// True value against estimate for β and every generator entry.
pub fn estimator_table(runs: &[HorizonRun], truth: &TimeScaledModel) -> String {
    let mut out = String::from("parameter,true_value,estimator,seed\n");
    let n = truth.n();
    for r in runs {
        if let Some(b) = r.fit.beta_hat {
            let _ = writeln!(out, "beta,{},{},{}", fmt_f64(truth.family.beta()), fmt_f64(b), r.seed);
        }
        for x in 0..n {
            for y in 0..n {
                let _ = writeln!(
                    out,
                    "lambda_{}{},{},{},{}",
                    x + 1,
                    y + 1,
                    fmt_f64(truth.lambda.rate(x, y)),
                    fmt_f64(r.fit.lambda_hat.rate(x, y)),
                    r.seed
                );
            }
        }
    }
    out
}

pub fn comparison_table(runs: &[ComparisonRun]) -> String {
    let mut out = String::from("model,train_paths,test_absorbed,d_statistic,p_value,seed\n");
    for r in runs {
        for (name, g) in [("time_scaled", &r.scaled_gof), ("homogeneous", &r.homogeneous_gof)] {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                r.train_paths,
                r.test_absorbed,
                fmt_f64(g.ks.statistic),
                fmt_f64(g.ks.p_value),
                r.seed
            );
        }
    }
    out
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(name), text.as_bytes())
}

/// Runs `kind` for every seed and writes its tables and plot data to `dir`.
pub fn run_study(kind: StudyKind, config: &RunConfig, seeds: &[u64], dir: &Path) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("a study needs at least one seed".into()));
    }
    std::fs::create_dir_all(dir)?;
    let truth = config.truth()?;
    match kind {
        StudyKind::Gompertz | StudyKind::Weibull => {
            let runs = horizon_study(config, seeds)?;
            if kind == StudyKind::Gompertz {
                write(dir, "parameters.csv", &parameter_table(&runs, &truth))?;
                write(dir, "gof.csv", &gof_table(&runs))?;
            } else {
                write(dir, "estimators.csv", &estimator_table(&runs, &truth))?;
                write(dir, "gof.csv", &gof_table(&runs))?;
            }
            for r in &runs {
                let tag = format!("T{}_seed{}", fmt_f64(r.horizon), r.seed);
                write(dir, &format!("ecdf_{tag}.csv"), &ecdf_csv(&r.gof.observed, &r.gof.simulated))?;
                write(dir, &format!("trace_{tag}.csv"), &trace_csv(&r.fit, r.absorbed_paths))?;
                if kind == StudyKind::Weibull {
                    let upper = r.gof.observed.values().last().copied().unwrap_or(r.horizon);
                    write(
                        dir,
                        &format!("density_{tag}.csv"),
                        &density_csv(&fitted_model(&r.fit)?, &truth, upper, 200)?,
                    )?;
                }
            }
        }
        StudyKind::Comparison => {
            let runs = comparison_study(config, seeds)?;
            write(dir, "comparison.csv", &comparison_table(&runs))?;
            for r in &runs {
                write(
                    dir,
                    &format!("ecdf_time_scaled_seed{}.csv", r.seed),
                    &ecdf_csv(&r.scaled_gof.observed, &r.scaled_gof.simulated),
                )?;
                write(
                    dir,
                    &format!("ecdf_homogeneous_seed{}.csv", r.seed),
                    &ecdf_csv(&r.homogeneous_gof.observed, &r.homogeneous_gof.simulated),
                )?;
            }
        }
    }
    Ok(())
}
