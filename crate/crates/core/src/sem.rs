//! Stochastic EM for the time-scaled model.
//!
//! Each iteration maps the panel onto the homogeneous clock with the current
//! β, fills every inter-observation gap with a Markov bridge, runs censored
//! paths on to absorption, re-estimates Λ from the completed paths and then
//! refines β by gradient ascent on the implied absorption times.

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{InitialDistribution, StateId, SubIntensityMatrix};
use crate::likelihood::{
    accumulate_statistics, gd_solve, mle_generator, BetaObjective, GdSettings, GdStep,
};
use crate::panel::{PanelObservationSet, PanelPath};
use crate::scaling::{FamilyKind, ScalingFamily};
use crate::sim::{complete_with_chain, ContinuousPath, JumpChain, Purpose, RandomStream, Timeline};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub family: FamilyKind,
    pub beta0: f64,
    pub gd: GdSettings,
    pub max_iterations: usize,
    pub max_bridge_attempts: u64,
    pub seed: u64,
    /// iterations run by the homogeneous (identity-clock) fit
    pub homogeneous_iterations: usize,
    /// trailing iterations averaged into the homogeneous estimate
    pub homogeneous_tail: usize,
    pub keep_paths: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            family: FamilyKind::Gompertz,
            beta0: 1.0,
            gd: GdSettings::default(),
            max_iterations: 200,
            max_bridge_attempts: crate::sim::DEFAULT_MAX_BRIDGE_ATTEMPTS,
            seed: 0,
            homogeneous_iterations: 300,
            homogeneous_tail: 20,
            keep_paths: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.family != FamilyKind::Identity && !(self.beta0.is_finite() && self.beta0 > 0.0) {
            return bad(format!("beta0 must be > 0, got {}", self.beta0));
        }
        if !(self.gd.eta.is_finite() && self.gd.eta > 0.0) {
            return bad(format!("eta must be > 0, got {}", self.gd.eta));
        }
        if !(self.gd.e_ell.is_finite() && self.gd.e_ell > 0.0) {
            return bad(format!("e_ell must be > 0, got {}", self.gd.e_ell));
        }
        if !(self.gd.beta_min.is_finite() && self.gd.beta_min > 0.0) {
            return bad(format!("beta_min must be > 0, got {}", self.gd.beta_min));
        }
        if self.gd.max_steps == 0 || self.max_iterations == 0 || self.max_bridge_attempts == 0 {
            return bad("iteration, step and bridge budgets must be positive".into());
        }
        if self.homogeneous_tail == 0 || self.homogeneous_tail > self.homogeneous_iterations {
            return bad(format!(
                "homogeneous tail {} must lie in 1..={}",
                self.homogeneous_tail, self.homogeneous_iterations
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// an iteration's β refinement needed a single update
    SingleUpdateConverged,
    MaxIterations,
    /// homogeneous fits run a fixed number of iterations
    FixedIterations,
}

impl Termination {
    pub fn tag(self) -> &'static str {
        match self {
            Termination::SingleUpdateConverged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::FixedIterations => "fixed_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda: SubIntensityMatrix,
    pub beta: Option<f64>,
    pub gd_updates: usize,
    pub bridge_attempts: u64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: FamilyKind,
    pub pi_hat: InitialDistribution,
    pub lambda_hat: SubIntensityMatrix,
    pub beta_hat: Option<f64>,
    pub iterations_used: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord>,
    pub initial_lambda: SubIntensityMatrix,
    pub initial_beta: Option<f64>,
    pub warnings: Vec<String>,
    /// gradient-ascent steps of every β refinement, index 0 for initialization
    pub beta_trace: Vec<Vec<GdStep>>,
    /// completed homogeneous-clock paths of the last iteration, if requested
    pub completed_paths: Option<Vec<ContinuousPath>>,
}

impl FitResult {
    pub fn scaling(&self) -> ScalingFamily {
        match self.beta_hat {
            Some(b) => ScalingFamily::new(self.family, b).expect("fitted beta is positive"),
            None => ScalingFamily::identity(),
        }
    }
}

/// Empirical distribution of the observed start states.
pub fn empirical_pi(panel: &PanelObservationSet) -> Result<InitialDistribution> {
    if panel.is_empty() {
        return Err(Error::Domain("panel has no paths".into()));
    }
    let mut counts = vec![0usize; panel.n()];
    for p in panel.paths() {
        counts[p.initial_state().index()] += 1;
    }
    let k = panel.len() as f64;
    InitialDistribution::new(counts.into_iter().map(|c| c as f64 / k).collect())
}

/// Reads a panel path as if continuously observed on its own timeline: each
/// state is held until the observation at which a different one is recorded.
pub fn naive_continuous_path(path: &PanelPath, n: usize) -> ContinuousPath {
    let mut times = vec![path.times[0]];
    let mut states = vec![path.states[0]];
    for (&t, &s) in path.times.iter().zip(&path.states).skip(1) {
        if s != *states.last().unwrap() {
            times.push(t);
            states.push(s);
        }
    }
    let absorbed = path.is_absorbed(n);
    ContinuousPath {
        timeline: Timeline::Homogeneous,
        times,
        states,
        end: path.last_time(),
        absorbed,
    }
}

/// Outcome of the initialization step.
#[derive(Debug, Clone)]
pub struct Initialization {
    pub pi: InitialDistribution,
    pub lambda: SubIntensityMatrix,
    pub beta: f64,
    pub gd_trace: Vec<GdStep>,
    pub warnings: Vec<String>,
}

/// Empirical π, naive Λ from the raw panel, and β refined on absorption
/// times bridged inside each path's final observation interval.
pub fn initialize(panel: &PanelObservationSet, config: &FitConfig) -> Result<Initialization> {
    config.validate()?;
    let n = panel.n();
    let pi = empirical_pi(panel)?;
    let naive: Vec<ContinuousPath> = panel.paths().iter().map(|p| naive_continuous_path(p, n)).collect();
    let lambda = mle_generator(&accumulate_statistics(n, &naive)?)?;
    let mut warnings = Vec::new();
    if config.family == FamilyKind::Identity {
        return Ok(Initialization {
            pi,
            lambda,
            beta: 1.0,
            gd_trace: Vec::new(),
            warnings,
        });
    }
    let chain = JumpChain::new(&lambda);
    let stream = RandomStream::new(config.seed);
    let absorbed: Vec<(usize, &PanelPath)> = panel
        .paths()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_absorbed(n))
        .collect();
    let times: Vec<f64> = absorbed
        .par_iter()
        .map(|&(k, p)| {
            let m = p.len();
            let (t1, x) = (p.times[m - 2], p.states[m - 2]);
            let (t2, y) = (p.times[m - 1], p.states[m - 1]);
            let b = bridge_with_retry(&chain, &stream, Purpose::Initialize, k, 0, m - 1, (t1, x, t2, y), config.max_bridge_attempts)?;
            Ok(b.path.end)
        })
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    if times.is_empty() {
        let msg = "no path is observed to absorb; beta is not refined during initialization".to_string();
        warn!("{msg}");
        warnings.push(msg);
        return Ok(Initialization {
            pi,
            lambda,
            beta: config.beta0,
            gd_trace: Vec::new(),
            warnings,
        });
    }
    let objective = BetaObjective::new(config.family, &pi, &lambda, &times)?;
    let out = gd_solve(&objective, config.beta0, &config.gd)?;
    info!("initialization: beta {} -> {} in {} updates", config.beta0, out.beta, out.steps);
    Ok(Initialization {
        pi,
        lambda,
        beta: out.beta,
        gd_trace: out.trace,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn bridge_with_retry(
    chain: &JumpChain,
    stream: &RandomStream,
    purpose: Purpose,
    path: usize,
    iteration: usize,
    segment: usize,
    (s1, x, s2, y): (f64, StateId, f64, StateId),
    max_attempts: u64,
) -> Result<crate::sim::Bridge> {
    let mut rng = stream.substream(purpose, path as u64, iteration as u64, segment as u64);
    match chain.bridge(s1, x, s2, y, &mut rng, max_attempts) {
        Err(Error::BridgeBudget { .. }) => {
            debug!("path {path} segment {segment}: bridge budget exhausted, retrying");
            let mut rng = stream.retry_substream(purpose, 1, path as u64, iteration as u64, segment as u64);
            chain.bridge(s1, x, s2, y, &mut rng, max_attempts)
        }
        other => other,
    }
}

/// One path completed on the homogeneous clock, plus the proposals it used.
#[derive(Debug, Clone)]
pub struct ImputedPath {
    pub path: ContinuousPath,
    pub bridge_attempts: u64,
}

/// Completes `path` on the clock `s = g⁻¹(t)`: bridges every observation gap
/// under `lambda` and, if censored, runs on to absorption.
#[allow(clippy::too_many_arguments)]
pub fn impute_path(
    path: &PanelPath,
    index: usize,
    n: usize,
    family: &ScalingFamily,
    lambda: &SubIntensityMatrix,
    chain: &JumpChain,
    stream: &RandomStream,
    iteration: usize,
    max_attempts: u64,
) -> Result<ImputedPath> {
    let s: Vec<f64> = path.times.iter().map(|&t| family.g_inv(t)).collect::<Result<_>>()?;
    if let Some(&bad) = s.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "path '{}': clock value {bad} overflows at beta = {}",
            path.id,
            family.beta()
        )));
    }
    let mut full = ContinuousPath {
        timeline: Timeline::Homogeneous,
        times: vec![s[0]],
        states: vec![path.states[0]],
        end: s[0],
        absorbed: false,
    };
    let mut attempts = 0;
    for j in 1..path.len() {
        let seg = (s[j - 1], path.states[j - 1], s[j], path.states[j]);
        let b = bridge_with_retry(chain, stream, Purpose::Sem, index, iteration, j, seg, max_attempts)?;
        attempts += b.attempts;
        full.extend_with(&b.path);
    }
    if !full.absorbed {
        let mut rng = stream.substream(Purpose::Censored, index as u64, iteration as u64, 0);
        let tail = complete_with_chain(chain, lambda, path.last_state(), full.end, &mut rng)?;
        full.extend_with(&tail);
    }
    debug_assert!(full.absorbed && full.final_state().is_absorbing(n));
    Ok(ImputedPath {
        path: full,
        bridge_attempts: attempts,
    })
}

/// State carried between iterations.
#[derive(Debug, Clone)]
pub struct SemState {
    pub lambda: SubIntensityMatrix,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub lambda: SubIntensityMatrix,
    pub beta: f64,
    pub gd_updates: usize,
    pub gd_trace: Vec<GdStep>,
    pub bridge_attempts: u64,
    pub completed: Vec<ContinuousPath>,
}

/// One stochastic-EM iteration (numbered from 1).
pub fn sem_iteration(
    panel: &PanelObservationSet,
    pi: &InitialDistribution,
    state: &SemState,
    config: &FitConfig,
    iteration: usize,
) -> Result<IterationOutput> {
    let n = panel.n();
    let family = if config.family == FamilyKind::Identity {
        ScalingFamily::identity()
    } else {
        config.family.with_beta(state.beta)?
    };
    let chain = JumpChain::new(&state.lambda);
    let stream = RandomStream::new(config.seed);
    let imputed: Vec<ImputedPath> = panel
        .paths()
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            impute_path(p, k, n, &family, &state.lambda, &chain, &stream, iteration, config.max_bridge_attempts)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let bridge_attempts = imputed.iter().map(|p| p.bridge_attempts).sum();
    let completed: Vec<ContinuousPath> = imputed.into_iter().map(|p| p.path).collect();
    let lambda = mle_generator(&accumulate_statistics(n, &completed)?)?;

    if config.family == FamilyKind::Identity {
        return Ok(IterationOutput {
            lambda,
            beta: 1.0,
            gd_updates: 0,
            gd_trace: Vec::new(),
            bridge_attempts,
            completed,
        });
    }
    let taus: Vec<f64> = completed
        .iter()
        .map(|p| family.g(p.end))
        .collect::<Result<_>>()?;
    let objective = BetaObjective::new(config.family, pi, &lambda, &taus)?;
    let out = gd_solve(&objective, state.beta, &config.gd)?;
    Ok(IterationOutput {
        lambda,
        beta: out.beta,
        gd_updates: out.steps,
        gd_trace: out.trace,
        bridge_attempts,
        completed,
    })
}

/// Fits the model to `panel`. The identity family runs the homogeneous
/// variant (fixed iterations, tail-averaged generator).
pub fn fit(panel: &PanelObservationSet, config: &FitConfig) -> Result<FitResult> {
    if config.family == FamilyKind::Identity {
        return fit_homogeneous(panel, config);
    }
    let init = initialize(panel, config)?;
    let mut state = SemState {
        lambda: init.lambda.clone(),
        beta: init.beta,
    };
    let mut trace = Vec::new();
    let mut beta_trace = vec![init.gd_trace.clone()];
    let mut completed = None;
    let mut termination = Termination::MaxIterations;
    for i in 1..=config.max_iterations {
        let out = sem_iteration(panel, &init.pi, &state, config, i).map_err(|e| e.at_iteration(i))?;
        debug!(
            "iteration {i}: beta {:.6} -> {:.6} ({} updates)",
            state.beta, out.beta, out.gd_updates
        );
        trace.push(IterationRecord {
            iteration: i,
            lambda: out.lambda.clone(),
            beta: Some(out.beta),
            gd_updates: out.gd_updates,
            bridge_attempts: out.bridge_attempts,
        });
        beta_trace.push(out.gd_trace);
        if config.keep_paths {
            completed = Some(out.completed);
        }
        state = SemState {
            lambda: out.lambda,
            beta: out.beta,
        };
        if out.gd_updates == 1 {
            termination = Termination::SingleUpdateConverged;
            break;
        }
    }
    if termination == Termination::MaxIterations {
        warn!("stochastic EM stopped after {} iterations without convergence", config.max_iterations);
    }
    info!("fit finished after {} iterations: beta = {}", trace.len(), state.beta);
    Ok(FitResult {
        family: config.family,
        pi_hat: init.pi,
        lambda_hat: state.lambda,
        beta_hat: Some(state.beta),
        iterations_used: trace.len(),
        termination,
        trace,
        initial_lambda: init.lambda,
        initial_beta: Some(init.beta),
        warnings: init.warnings,
        beta_trace,
        completed_paths: completed,
    })
}

/// Homogeneous fit: a fixed number of iterations on the raw timeline, with
/// the generator averaged over the trailing iterations.
pub fn fit_homogeneous(panel: &PanelObservationSet, config: &FitConfig) -> Result<FitResult> {
    let config = FitConfig {
        family: FamilyKind::Identity,
        ..config.clone()
    };
    let init = initialize(panel, &config)?;
    let n = panel.n();
    let mut state = SemState {
        lambda: init.lambda.clone(),
        beta: 1.0,
    };
    let mut trace = Vec::new();
    let mut completed = None;
    let mut off_sum = DMatrix::<f64>::zeros(n, n);
    let mut exit_sum = vec![0.0; n];
    let tail_start = config.homogeneous_iterations - config.homogeneous_tail + 1;
    for i in 1..=config.homogeneous_iterations {
        let out = sem_iteration(panel, &init.pi, &state, &config, i).map_err(|e| e.at_iteration(i))?;
        if i >= tail_start {
            for x in 0..n {
                for y in 0..n {
                    if x != y {
                        off_sum[(x, y)] += out.lambda.rate(x, y);
                    }
                }
                exit_sum[x] += out.lambda.exit_rates()[x];
            }
        }
        trace.push(IterationRecord {
            iteration: i,
            lambda: out.lambda.clone(),
            beta: None,
            gd_updates: 0,
            bridge_attempts: out.bridge_attempts,
        });
        if config.keep_paths && i == config.homogeneous_iterations {
            completed = Some(out.completed);
        }
        state.lambda = out.lambda;
    }
    let w = config.homogeneous_tail as f64;
    let lambda_hat = SubIntensityMatrix::from_rates(
        &(off_sum / w),
        &exit_sum.iter().map(|v| v / w).collect::<Vec<_>>(),
    )?;
    Ok(FitResult {
        family: FamilyKind::Identity,
        pi_hat: init.pi,
        lambda_hat,
        beta_hat: None,
        iterations_used: trace.len(),
        termination: Termination::FixedIterations,
        trace,
        initial_lambda: init.lambda,
        initial_beta: None,
        warnings: init.warnings,
        beta_trace: Vec::new(),
        completed_paths: completed,
    })
}
