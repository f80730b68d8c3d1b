//! Complete-data sufficient statistics and MLE of the sub-intensity matrix,
//! the time-scaled phase-type density, and gradient ascent in β.

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expm::{matrix_exponential, matrix_exponential_log_scaled};
use crate::generator::{InitialDistribution, StateId, SubIntensityMatrix};
use crate::scaling::{FamilyKind, ScalingFamily};
use crate::sim::{ContinuousPath, Timeline};

/// Counts and occupation times of fully observed homogeneous paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistics {
    n: usize,
    /// paths starting in each state
    pub starts: Vec<u64>,
    /// `transitions[x * n + y]`: jumps x → y between transient states
    pub transitions: Vec<u64>,
    /// jumps into absorption from each state
    pub absorptions: Vec<u64>,
    /// total time spent in each state
    pub occupation: Vec<f64>,
}

impl SufficientStatistics {
    pub fn zeros(n: usize) -> Self {
        SufficientStatistics {
            n,
            starts: vec![0; n],
            transitions: vec![0; n * n],
            absorptions: vec![0; n],
            occupation: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn transition(&self, from: usize, to: usize) -> u64 {
        self.transitions[from * self.n + to]
    }

    pub fn path_count(&self) -> u64 {
        self.starts.iter().sum()
    }

    /// Adds one path. The path must lie on the homogeneous timeline.
    pub fn add_path(&mut self, path: &ContinuousPath) -> Result<()> {
        if path.timeline != Timeline::Homogeneous {
            return Err(Error::Domain(
                "sufficient statistics need paths on the homogeneous timeline".into(),
            ));
        }
        let n = self.n;
        let x0 = path.initial_state();
        if x0.index() >= n {
            return Err(Error::Domain(format!("path starts in absorbing state {x0}")));
        }
        self.starts[x0.index()] += 1;
        for i in 0..path.states.len() {
            let x = path.states[i];
            if x.is_absorbing(n) {
                break;
            }
            let leave = path.times.get(i + 1).copied().unwrap_or(path.end);
            self.occupation[x.index()] += leave - path.times[i];
            if let Some(&y) = path.states.get(i + 1) {
                if y.is_absorbing(n) {
                    self.absorptions[x.index()] += 1;
                } else {
                    self.transitions[x.index() * n + y.index()] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SufficientStatistics) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.starts.iter_mut().zip(&other.starts) {
            *a += b;
        }
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            *a += b;
        }
        for (a, b) in self.absorptions.iter_mut().zip(&other.absorptions) {
            *a += b;
        }
        for (a, b) in self.occupation.iter_mut().zip(&other.occupation) {
            *a += b;
        }
    }
}

/// Statistics of a set of paths, summed in the given order.
pub fn accumulate_statistics<'a>(
    n: usize,
    paths: impl IntoIterator<Item = &'a ContinuousPath>,
) -> Result<SufficientStatistics> {
    let mut stats = SufficientStatistics::zeros(n);
    for p in paths {
        stats.add_path(p)?;
    }
    Ok(stats)
}

/// `λ̂_xy = N_xy / R_x`, `λ̂_x = N_x / R_x`, diagonal balancing each row.
pub fn mle_generator(stats: &SufficientStatistics) -> Result<SubIntensityMatrix> {
    let n = stats.n;
    let mut off = DMatrix::<f64>::zeros(n, n);
    let mut exit = vec![0.0; n];
    for x in 0..n {
        let r = stats.occupation[x];
        if !(r > 0.0) {
            return Err(Error::StarvedState { state: x + 1 });
        }
        for y in 0..n {
            if x != y {
                off[(x, y)] = stats.transition(x, y) as f64 / r;
            }
        }
        exit[x] = stats.absorptions[x] as f64 / r;
    }
    SubIntensityMatrix::from_rates(&off, &exit)
}

/// Empirical start-state frequencies.
pub fn mle_initial(stats: &SufficientStatistics) -> Result<InitialDistribution> {
    let k = stats.path_count();
    if k == 0 {
        return Err(Error::Domain("no paths to estimate the initial distribution".into()));
    }
    InitialDistribution::new(stats.starts.iter().map(|&b| b as f64 / k as f64).collect())
}

/// Complete-data log-likelihood of `(π, Λ)` given the statistics.
/// Returns `-∞` when a positive count meets a zero rate.
pub fn complete_data_loglik(
    stats: &SufficientStatistics,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
) -> f64 {
    fn term(count: u64, p: f64) -> f64 {
        if count == 0 {
            0.0
        } else {
            count as f64 * p.ln()
        }
    }
    let n = stats.n;
    let mut ll = 0.0;
    for x in 0..n {
        ll += term(stats.starts[x], pi.prob(x));
        for y in 0..n {
            if x != y {
                ll += term(stats.transition(x, y), m.rate(x, y));
            }
        }
        ll += term(stats.absorptions[x], m.exit_rates()[x]);
        ll -= stats.occupation[x] * m.total_rate(x);
    }
    ll
}

fn check_model(pi: &InitialDistribution, m: &SubIntensityMatrix) -> Result<()> {
    if pi.n() != m.n() {
        return Err(Error::Domain(format!(
            "initial distribution has {} states but generator has {}",
            pi.n(),
            m.n()
        )));
    }
    Ok(())
}

/// `log f(t)` for the time-scaled phase-type distribution, computed with a
/// log-scaled matrix exponential so large clock values do not underflow.
pub fn iph_log_density(
    family: &ScalingFamily,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
    t: f64,
) -> Result<f64> {
    check_model(pi, m)?;
    Ok(density_terms(family, pi, m, t, 0)?.0)
}

/// `f(t) = h(t) π exp(g⁻¹(t) Λ) λ`.
pub fn iph_density(
    family: &ScalingFamily,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
    t: f64,
) -> Result<f64> {
    check_model(pi, m)?;
    let e = matrix_exponential(m.rates(), family.g_inv(t)?)?;
    let v = (pi.as_row() * e * m.exit_rates())[(0, 0)];
    Ok(family.h(t)? * v)
}

/// `F(t) = 1 - π exp(g⁻¹(t) Λ) 1`.
pub fn iph_cdf(
    family: &ScalingFamily,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
    t: f64,
) -> Result<f64> {
    check_model(pi, m)?;
    let s = family.g_inv(t)?;
    if s.is_infinite() {
        return Ok(1.0);
    }
    let e = matrix_exponential(m.rates(), s)?;
    let ones = DVector::from_element(m.n(), 1.0);
    let survival = (pi.as_row() * e * ones)[(0, 0)];
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

/// Log-density and its β-derivative at one observation.
fn density_terms(
    family: &ScalingFamily,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
    t: f64,
    index: usize,
) -> Result<(f64, f64)> {
    let s = family.g_inv(t)?;
    if !s.is_finite() {
        return Err(Error::DensityUnderflow { index, time: t });
    }
    let (log_scale, e) = matrix_exponential_log_scaled(m.rates(), s)?;
    let row: RowDVector<f64> = pi.as_row() * e;
    let lambda = m.exit_rates();
    let num = row.dot(&lambda.transpose());
    if !(num > 0.0) || !num.is_finite() {
        return Err(Error::DensityUnderflow { index, time: t });
    }
    let loglik = family.log_h(t)? + log_scale + num.ln();
    let gradient = if family.kind() == FamilyKind::Identity {
        0.0
    } else {
        let deriv = (&row * m.rates() * lambda)[(0, 0)];
        family.dlog_h_dbeta(t)? + family.dg_inv_dbeta(t)? * deriv / num
    };
    Ok((loglik, gradient))
}

/// Observed-data log-likelihood in β for absorption times with `(π, Λ)` held
/// fixed.
#[derive(Debug, Clone)]
pub struct BetaObjective<'a> {
    pub kind: FamilyKind,
    pub pi: &'a InitialDistribution,
    pub generator: &'a SubIntensityMatrix,
    pub times: &'a [f64],
}

impl<'a> BetaObjective<'a> {
    pub fn new(
        kind: FamilyKind,
        pi: &'a InitialDistribution,
        generator: &'a SubIntensityMatrix,
        times: &'a [f64],
    ) -> Result<Self> {
        check_model(pi, generator)?;
        if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::Domain(format!("absorption time {t} is not positive and finite")));
        }
        Ok(BetaObjective {
            kind,
            pi,
            generator,
            times,
        })
    }

    /// `(ℓ(β), ∂ℓ/∂β)`, summed in observation order.
    pub fn evaluate(&self, beta: f64) -> Result<(f64, f64)> {
        let family = self.kind.with_beta(beta)?;
        let terms: Vec<(f64, f64)> = self
            .times
            .par_iter()
            .enumerate()
            .map(|(i, &t)| density_terms(&family, self.pi, self.generator, t, i))
            .collect::<Result<_>>()?;
        let mut ll = 0.0;
        let mut grad = 0.0;
        for (l, g) in terms {
            ll += l;
            grad += g;
        }
        Ok((ll, grad))
    }

    pub fn beta_loglik(&self, beta: f64) -> Result<f64> {
        Ok(self.evaluate(beta)?.0)
    }

    pub fn beta_gradient(&self, beta: f64) -> Result<f64> {
        Ok(self.evaluate(beta)?.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdStep {
    pub step: usize,
    pub beta: f64,
    pub loglik: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdSettings {
    pub eta: f64,
    pub e_ell: f64,
    pub beta_min: f64,
    pub max_steps: usize,
}

impl Default for GdSettings {
    fn default() -> Self {
        GdSettings {
            eta: 1e-6,
            e_ell: 0.01,
            beta_min: 1e-5,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub beta: f64,
    /// number of updates performed
    pub steps: usize,
    /// `trace[0]` is the starting point
    pub trace: Vec<GdStep>,
}

/// Fixed-step gradient ascent `β ← max(β_min, β + η ∇ℓ)`, stopping at the
/// first update that changes `ℓ` by less than `e_ℓ`.
pub fn gd_solve(objective: &BetaObjective<'_>, beta0: f64, settings: &GdSettings) -> Result<GdOutcome> {
    if !(settings.eta > 0.0 && settings.e_ell > 0.0 && settings.beta_min > 0.0) {
        return Err(Error::Config(
            "gradient ascent needs eta, e_ell and beta_min all > 0".into(),
        ));
    }
    let mut beta = beta0.max(settings.beta_min);
    let (mut ll, mut grad) = objective.evaluate(beta)?;
    let mut trace = vec![GdStep {
        step: 0,
        beta,
        loglik: ll,
        gradient: grad,
    }];
    for step in 1..=settings.max_steps {
        beta = (beta + settings.eta * grad).max(settings.beta_min);
        let (next_ll, next_grad) = objective.evaluate(beta)?;
        trace.push(GdStep {
            step,
            beta,
            loglik: next_ll,
            gradient: next_grad,
        });
        if (next_ll - ll).abs() < settings.e_ell {
            return Ok(GdOutcome {
                beta,
                steps: step,
                trace,
            });
        }
        ll = next_ll;
        grad = next_grad;
    }
    Err(Error::GdNonConvergence {
        trace: Box::new(trace),
    })
}

/// Log-likelihood of absorption times under the full time-scaled model.
pub fn iph_loglik(
    family: &ScalingFamily,
    pi: &InitialDistribution,
    m: &SubIntensityMatrix,
    times: &[f64],
) -> Result<f64> {
    BetaObjective::new(family.kind(), pi, m, times)?;
    let terms: Vec<f64> = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| density_terms(family, pi, m, t, i).map(|(l, _)| l))
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().sum())
}

/// Homogeneous path from a state sequence and jump epochs, ending in absorption.
pub fn absorbed_path(states: &[usize], times: &[f64]) -> ContinuousPath {
    ContinuousPath {
        timeline: Timeline::Homogeneous,
        times: times.to_vec(),
        states: states.iter().map(|&s| StateId(s)).collect(),
        end: *times.last().unwrap(),
        absorbed: true,
    }
}
