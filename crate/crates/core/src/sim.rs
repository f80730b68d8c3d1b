//! Path simulation: jump-chain/holding-time construction, time-transformed
//! paths, panel discretization, rejection-sampled Markov bridges and
//! completion of censored paths.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::generator::{InitialDistribution, StateId, SubIntensityMatrix};
use crate::panel::PanelPath;
use crate::scaling::ScalingFamily;

pub const DEFAULT_MAX_BRIDGE_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timeline {
    Homogeneous,
    Inhomogeneous,
}

impl Timeline {
    pub fn tag(self) -> &'static str {
        match self {
            Timeline::Homogeneous => "homogeneous",
            Timeline::Inhomogeneous => "inhomogeneous",
        }
    }
}

/// A continuously observed trajectory, or a segment of one.
///
/// `times[i]` is the epoch at which `states[i]` was entered; `times[0]` is the
/// origin (0 for a full path). `end` is the absorption epoch when `absorbed`
/// and the end of the observation window otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath {
    pub timeline: Timeline,
    pub times: Vec<f64>,
    pub states: Vec<StateId>,
    pub end: f64,
    pub absorbed: bool,
}

impl ContinuousPath {
    pub fn initial_state(&self) -> StateId {
        self.states[0]
    }

    pub fn final_state(&self) -> StateId {
        *self.states.last().unwrap()
    }

    pub fn jump_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn absorption_time(&self) -> Option<f64> {
        self.absorbed.then(|| *self.times.last().unwrap())
    }

    /// State occupied at `t` (cadlag: the last state entered at or before `t`).
    pub fn state_at(&self, t: f64) -> StateId {
        let idx = self.times.partition_point(|&e| e <= t);
        self.states[idx.saturating_sub(1)]
    }

    /// Appends `seg`, which must start at this path's end in its final state.
    pub(crate) fn extend_with(&mut self, seg: &ContinuousPath) {
        debug_assert_eq!(seg.initial_state(), self.final_state());
        self.times.extend_from_slice(&seg.times[1..]);
        self.states.extend_from_slice(&seg.states[1..]);
        self.end = seg.end;
        self.absorbed = seg.absorbed;
    }
}

/// What a random substream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Simulate = 1,
    Initialize = 2,
    Sem = 3,
    GoodnessOfFit = 4,
    Split = 5,
    Censored = 6,
}

/// Seeded source of independent, reproducible substreams.
///
/// A substream is a ChaCha8 generator whose 256-bit key is the tuple
/// `(seed, path, purpose|retry|iteration, segment)`, so identical keys give
/// identical draws regardless of scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, purpose: Purpose, path: u64, iteration: u64, segment: u64) -> ChaCha8Rng {
        self.keyed(purpose, 0, path, iteration, segment)
    }

    pub fn retry_substream(
        &self,
        purpose: Purpose,
        retry: u8,
        path: u64,
        iteration: u64,
        segment: u64,
    ) -> ChaCha8Rng {
        self.keyed(purpose, retry, path, iteration, segment)
    }

    fn keyed(&self, purpose: Purpose, retry: u8, path: u64, iteration: u64, segment: u64) -> ChaCha8Rng {
        let tag = ((purpose as u64) << 56) | ((retry as u64) << 48) | (iteration & ((1 << 48) - 1));
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&path.to_le_bytes());
        key[16..24].copy_from_slice(&tag.to_le_bytes());
        key[24..].copy_from_slice(&segment.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

/// Embedded jump chain of a generator, precomputed for fast simulation.
#[derive(Debug, Clone)]
pub struct JumpChain {
    n: usize,
    total: Vec<f64>,
    // per state: cumulative rates over targets (absorption last)
    cumulative: Vec<Vec<(f64, StateId)>>,
}

impl JumpChain {
    pub fn new(m: &SubIntensityMatrix) -> Self {
        let n = m.n();
        let mut total = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for x in 0..n {
            let mut acc = 0.0;
            let mut row = Vec::new();
            for y in 0..n {
                let r = m.rate(x, y);
                if y != x && r > 0.0 {
                    acc += r;
                    row.push((acc, StateId(y)));
                }
            }
            let exit = m.exit_rates()[x];
            if exit > 0.0 {
                acc += exit;
                row.push((acc, StateId::absorbing(n)));
            }
            total.push(acc);
            cumulative.push(row);
        }
        JumpChain { n, total, cumulative }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn next_state<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> StateId {
        let row = &self.cumulative[x];
        let u = rng.random::<f64>() * self.total[x];
        match row.iter().find(|(c, _)| u < *c) {
            Some(&(_, s)) => s,
            None => row.last().unwrap().1,
        }
    }

    /// Runs the chain from `state` at `start` until `stop` or absorption,
    /// appending entered states and epochs. Returns the final state.
    fn run<R: Rng + ?Sized>(
        &self,
        mut state: StateId,
        start: f64,
        stop: f64,
        rng: &mut R,
        times: &mut Vec<f64>,
        states: &mut Vec<StateId>,
    ) -> StateId {
        let mut t = start;
        while !state.is_absorbing(self.n) {
            let rate = self.total[state.index()];
            if rate <= 0.0 {
                break;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
            if t + hold > stop {
                break;
            }
            t += hold;
            state = self.next_state(state.index(), rng);
            times.push(t);
            states.push(state);
        }
        state
    }

    /// Unconditioned path from `state` at time `start` over `[start, stop]`.
    pub fn simulate_from<R: Rng + ?Sized>(
        &self,
        state: StateId,
        start: f64,
        stop: f64,
        rng: &mut R,
    ) -> ContinuousPath {
        let mut times = vec![start];
        let mut states = vec![state];
        let last = self.run(state, start, stop, rng, &mut times, &mut states);
        let absorbed = last.is_absorbing(self.n);
        ContinuousPath {
            timeline: Timeline::Homogeneous,
            end: if absorbed { *times.last().unwrap() } else { stop },
            times,
            states,
            absorbed,
        }
    }

    /// Rejection-sampled `(s1, x, s2, y)` bridge: paths from `x` over
    /// `s2 - s1` are redrawn until the state at `s2` is `y`.
    pub fn bridge<R: Rng + ?Sized>(
        &self,
        s1: f64,
        x: StateId,
        s2: f64,
        y: StateId,
        rng: &mut R,
        max_attempts: u64,
    ) -> Result<Bridge> {
        if x.index() >= self.n {
            return Err(Error::Domain(format!("bridge must start in a transient state, got {x}")));
        }
        if y.index() > self.n {
            return Err(Error::Domain(format!("bridge target {y} is not a state")));
        }
        if !(s2 > s1) {
            return Err(Error::Domain(format!("bridge interval [{s1}, {s2}] is empty")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for attempt in 1..=max_attempts {
            times.clear();
            states.clear();
            times.push(s1);
            states.push(x);
            let last = self.run(x, s1, s2, rng, &mut times, &mut states);
            if last == y {
                let absorbed = y.is_absorbing(self.n);
                return Ok(Bridge {
                    path: ContinuousPath {
                        timeline: Timeline::Homogeneous,
                        end: if absorbed { *times.last().unwrap() } else { s2 },
                        times,
                        states,
                        absorbed,
                    },
                    attempts: attempt,
                });
            }
        }
        Err(Error::BridgeBudget {
            from: x.number(),
            to: y.number(),
            duration: s2 - s1,
            attempts: max_attempts,
        })
    }
}

/// An accepted bridge and the number of proposals it took.
#[derive(Debug, Clone)]
pub struct Bridge {
    pub path: ContinuousPath,
    pub attempts: u64,
}

fn draw_initial<R: Rng + ?Sized>(pi: &InitialDistribution, rng: &mut R) -> StateId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for x in 0..pi.n() {
        let p = pi.prob(x);
        if p > 0.0 {
            last_positive = x;
            acc += p;
            if u < acc {
                return StateId(x);
            }
        }
    }
    StateId(last_positive)
}

fn check_dims(m: &SubIntensityMatrix, pi: &InitialDistribution) -> Result<()> {
    if m.n() != pi.n() {
        return Err(Error::Domain(format!(
            "generator has {} states but initial distribution has {}",
            m.n(),
            pi.n()
        )));
    }
    Ok(())
}

/// Every state reachable from the support of `pi` must be able to absorb.
fn check_terminates(m: &SubIntensityMatrix, pi: &InitialDistribution) -> Result<()> {
    let n = m.n();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&x| pi.prob(x) > 0.0).collect();
    for &x in &stack {
        seen[x] = true;
    }
    while let Some(x) = stack.pop() {
        if !m.can_absorb_from(x) {
            return Err(Error::Unreachable { state: x + 1 });
        }
        for y in 0..n {
            if y != x && !seen[y] && m.rate(x, y) > 0.0 {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    Ok(())
}

/// Path of the homogeneous process up to `horizon` (may be infinite).
pub fn simulate_homogeneous<R: Rng + ?Sized>(
    m: &SubIntensityMatrix,
    pi: &InitialDistribution,
    horizon: f64,
    rng: &mut R,
) -> Result<ContinuousPath> {
    check_dims(m, pi)?;
    if !(horizon >= 0.0) {
        return Err(Error::Domain(format!("horizon must be >= 0, got {horizon}")));
    }
    if horizon.is_infinite() {
        check_terminates(m, pi)?;
    }
    let chain = JumpChain::new(m);
    let x0 = draw_initial(pi, rng);
    Ok(chain.simulate_from(x0, 0.0, horizon, rng))
}

/// Path of the time-scaled process up to inhomogeneous time `horizon`:
/// a homogeneous path to `g⁻¹(horizon)` with every epoch mapped through `g`.
pub fn simulate_inhomogeneous<R: Rng + ?Sized>(
    m: &SubIntensityMatrix,
    pi: &InitialDistribution,
    family: &ScalingFamily,
    horizon: f64,
    rng: &mut R,
) -> Result<ContinuousPath> {
    let clock_horizon = if horizon.is_infinite() {
        f64::INFINITY
    } else {
        family.g_inv(horizon)?
    };
    let path = simulate_homogeneous(m, pi, clock_horizon, rng)?;
    to_inhomogeneous(&path, family, horizon)
}

/// Maps a homogeneous path epochwise through `g`.
pub fn to_inhomogeneous(
    path: &ContinuousPath,
    family: &ScalingFamily,
    horizon: f64,
) -> Result<ContinuousPath> {
    let times = path
        .times
        .iter()
        .map(|&s| family.g(s))
        .collect::<Result<Vec<_>>>()?;
    let end = if path.absorbed {
        *times.last().unwrap()
    } else {
        horizon
    };
    Ok(ContinuousPath {
        timeline: Timeline::Inhomogeneous,
        times,
        states: path.states.clone(),
        end,
        absorbed: path.absorbed,
    })
}

/// Observes `path` on `grid`. Grid points after censoring are dropped; after
/// absorption only the first grid point at or beyond the absorption epoch is
/// kept, recording the absorbing state.
pub fn discretize(path: &ContinuousPath, grid: &[f64], id: impl Into<String>) -> Result<PanelPath> {
    if grid.is_empty() {
        return Err(Error::Domain("observation grid is empty".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Domain(format!("observation grid starts at {} instead of 0", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("observation grid is not increasing".into()));
    }
    let n_absorbing = path.absorption_time();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for &g in grid {
        if let Some(ta) = n_absorbing {
            if g >= ta {
                times.push(g);
                states.push(path.final_state());
                break;
            }
        } else if g > path.end {
            break;
        }
        times.push(g);
        states.push(path.state_at(g));
    }
    Ok(PanelPath::new(id, times, states))
}

/// `(s1, x, s2, y)` bridge under `m`; see [`JumpChain::bridge`].
pub fn bridge_sample<R: Rng + ?Sized>(
    m: &SubIntensityMatrix,
    s1: f64,
    x: StateId,
    s2: f64,
    y: StateId,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Bridge> {
    JumpChain::new(m).bridge(s1, x, s2, y, rng, max_attempts)
}

/// Unconditioned continuation from `last_state` (at time 0) until absorption.
pub fn complete_censored<R: Rng + ?Sized>(
    m: &SubIntensityMatrix,
    last_state: StateId,
    rng: &mut R,
) -> Result<ContinuousPath> {
    complete_with_chain(&JumpChain::new(m), m, last_state, 0.0, rng)
}

pub(crate) fn complete_with_chain<R: Rng + ?Sized>(
    chain: &JumpChain,
    m: &SubIntensityMatrix,
    last_state: StateId,
    start: f64,
    rng: &mut R,
) -> Result<ContinuousPath> {
    if last_state.index() >= m.n() {
        return Err(Error::Domain(format!(
            "censored completion must start in a transient state, got {last_state}"
        )));
    }
    if !m.can_absorb_from(last_state.index()) {
        return Err(Error::Unreachable {
            state: last_state.number(),
        });
    }
    Ok(chain.simulate_from(last_state, start, f64::INFINITY, rng))
}

/// Regular grid `0, Δ, 2Δ, …` up to and including `horizon` (within 1e-9Δ).
pub fn regular_grid(delta: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!(
            "grid needs delta > 0 and finite horizon, got delta={delta}, horizon={horizon}"
        )));
    }
    let count = (horizon / delta + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * delta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof::{ks_one_sample, SampleSet};
    use crate::scaling::FamilyKind;
    use nalgebra::DMatrix;

    fn gen(n: usize, v: &[f64]) -> SubIntensityMatrix {
        SubIntensityMatrix::new(DMatrix::from_row_slice(n, n, v)).unwrap()
    }

    fn weibull_study() -> (SubIntensityMatrix, InitialDistribution) {
        (
            gen(2, &[-3.0, 0.1, 0.01, -0.1]),
            InitialDistribution::new(vec![0.5, 0.5]).unwrap(),
        )
    }

    fn gompertz_study() -> (SubIntensityMatrix, InitialDistribution) {
        (
            gen(
                3,
                &[-0.1357, 0.1214, 0.0, 0.0130, -0.0421, 0.0288, 0.1415, 0.0184, -0.1620],
            ),
            InitialDistribution::new(vec![0.0451, 0.1303, 0.8246]).unwrap(),
        )
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let rs = RandomStream::new(7);
        let a: u64 = rs.substream(Purpose::Sem, 3, 4, 5).random();
        let b: u64 = rs.substream(Purpose::Sem, 3, 4, 5).random();
        let c: u64 = rs.substream(Purpose::Sem, 3, 4, 6).random();
        let d: u64 = rs.retry_substream(Purpose::Sem, 1, 3, 4, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn exponential_absorption_mean() {
        let m = gen(1, &[-1.0]);
        let pi = InitialDistribution::new(vec![1.0]).unwrap();
        let mut rng = RandomStream::new(1).substream(Purpose::Simulate, 0, 0, 0);
        let k = 100_000;
        let mut sum = 0.0;
        for _ in 0..k {
            let p = simulate_homogeneous(&m, &pi, f64::INFINITY, &mut rng).unwrap();
            assert!(p.absorbed);
            assert_eq!(p.jump_count(), 1);
            sum += p.absorption_time().unwrap();
        }
        assert!((sum / k as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn initial_state_frequencies() {
        let (m, pi) = weibull_study();
        let mut rng = RandomStream::new(2).substream(Purpose::Simulate, 0, 0, 0);
        let k = 100_000;
        let ones = (0..k)
            .filter(|_| simulate_homogeneous(&m, &pi, 1.0, &mut rng).unwrap().initial_state() == StateId(0))
            .count();
        assert!((ones as f64 / k as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn zero_horizon_path_is_just_the_start() {
        let (m, pi) = weibull_study();
        let mut rng = RandomStream::new(3).substream(Purpose::Simulate, 0, 0, 0);
        let p = simulate_homogeneous(&m, &pi, 0.0, &mut rng).unwrap();
        assert_eq!(p.states.len(), 1);
        assert!(!p.absorbed);
        assert_eq!(p.end, 0.0);
    }

    #[test]
    fn infinite_horizon_rejected_when_absorption_unreachable() {
        let m = gen(2, &[-1.0, 1.0, 0.0, 0.0]);
        let pi = InitialDistribution::new(vec![1.0, 0.0]).unwrap();
        let mut rng = RandomStream::new(3).substream(Purpose::Simulate, 0, 0, 0);
        assert!(matches!(
            simulate_homogeneous(&m, &pi, f64::INFINITY, &mut rng),
            Err(Error::Unreachable { state: 1 })
        ));
        // finite horizon is fine
        assert!(simulate_homogeneous(&m, &pi, 5.0, &mut rng).is_ok());
    }

    #[test]
    fn identity_family_reproduces_homogeneous_path() {
        let (m, pi) = gompertz_study();
        let rs = RandomStream::new(9);
        for k in 0..50 {
            let a = simulate_homogeneous(&m, &pi, 30.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            let b = simulate_inhomogeneous(&m, &pi, &ScalingFamily::identity(), 30.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            assert_eq!(a.states, b.states);
            assert_eq!(a.times, b.times);
            assert_eq!(b.timeline, Timeline::Inhomogeneous);
        }
    }

    #[test]
    fn weibull_epochs_are_cube_roots() {
        let (m, pi) = weibull_study();
        let f = ScalingFamily::new(FamilyKind::Weibull, 3.0).unwrap();
        let rs = RandomStream::new(10);
        for k in 0..200 {
            let h = simulate_homogeneous(&m, &pi, 125.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            let i = simulate_inhomogeneous(&m, &pi, &f, 5.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            assert_eq!(h.states, i.states);
            for (s, t) in h.times.iter().zip(&i.times) {
                assert!((s.cbrt() - t).abs() <= 1e-12 * t.max(1.0));
            }
        }
    }

    #[test]
    fn time_transform_commutes_with_simulation() {
        let (m, pi) = gompertz_study();
        let f = ScalingFamily::new(FamilyKind::Gompertz, 0.1019).unwrap();
        let rs = RandomStream::new(11);
        for k in 0..200 {
            let h = simulate_homogeneous(&m, &pi, f.g_inv(40.0).unwrap(), &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            let i = simulate_inhomogeneous(&m, &pi, &f, 40.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            assert_eq!(h.states, i.states);
            for (s, t) in h.times.iter().zip(&i.times) {
                assert!((f.g(*s).unwrap() - t).abs() <= 1e-12 * t.max(1.0));
            }
        }
    }

    #[test]
    fn gompertz_absorption_mean_matches_transformed_ph_samples() {
        let (m, pi) = gompertz_study();
        let beta = 0.1019;
        let f = ScalingFamily::new(FamilyKind::Gompertz, beta).unwrap();
        let k = 100_000u64;
        let rs = RandomStream::new(12);
        let inhom: f64 = (0..k)
            .map(|i| {
                simulate_inhomogeneous(&m, &pi, &f, f64::INFINITY, &mut rs.substream(Purpose::Simulate, i, 0, 0))
                    .unwrap()
                    .absorption_time()
                    .unwrap()
            })
            .sum::<f64>()
            / k as f64;
        // independent draws of rho ~ PH, transformed by (1/β) log(βρ + 1)
        let rs2 = RandomStream::new(13);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..k {
            let rho = simulate_homogeneous(&m, &pi, f64::INFINITY, &mut rs2.substream(Purpose::Simulate, i, 0, 0))
                .unwrap()
                .absorption_time()
                .unwrap();
            let tau = (beta * rho + 1.0).ln() / beta;
            sum += tau;
            sum2 += tau * tau;
        }
        let mean = sum / k as f64;
        let sd = (sum2 / k as f64 - mean * mean).sqrt();
        let se = sd * (2.0 / k as f64).sqrt();
        assert!((inhom - mean).abs() < 4.0 * se, "{inhom} vs {mean} (se {se})");
    }

    #[test]
    fn holding_times_are_exponential() {
        let (m, _) = weibull_study();
        let chain = JumpChain::new(&m);
        let mut rng = RandomStream::new(14).substream(Purpose::Simulate, 0, 0, 0);
        let holds: Vec<f64> = (0..10_000)
            .map(|_| {
                let p = chain.simulate_from(StateId(0), 0.0, f64::INFINITY, &mut rng);
                p.times[1]
            })
            .collect();
        let sample = SampleSet::new(holds).unwrap();
        let (_, p) = ks_one_sample(&sample, |t| 1.0 - (-3.0 * t).exp());
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn discretize_cadlag_lookup() {
        let path = ContinuousPath {
            timeline: Timeline::Inhomogeneous,
            times: vec![0.0, 0.35],
            states: vec![StateId(0), StateId(1)],
            end: 1.0,
            absorbed: false,
        };
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let obs = discretize(&path, &grid, "p").unwrap();
        assert_eq!(obs.states[3], StateId(0));
        assert_eq!(obs.states[4], StateId(1));
        assert_eq!(obs.len(), 11);
    }

    #[test]
    fn discretize_absorption_recorded_at_next_grid_point() {
        let path = ContinuousPath {
            timeline: Timeline::Inhomogeneous,
            times: vec![0.0, 1.2, 2.7],
            states: vec![StateId(0), StateId(1), StateId(2)],
            end: 2.7,
            absorbed: true,
        };
        let grid = regular_grid(1.0, 10.0).unwrap();
        let obs = discretize(&path, &grid, "p").unwrap();
        assert_eq!(obs.times, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(obs.states.last().unwrap().number(), 3);
        assert!(discretize(&path, &[], "p").is_err());
        assert!(discretize(&path, &[0.5, 1.0], "p").is_err());
    }

    #[test]
    fn discretize_agrees_with_direct_lookup() {
        let (m, pi) = gompertz_study();
        let rs = RandomStream::new(15);
        let grid = regular_grid(1.0, 80.0).unwrap();
        for k in 0..300 {
            let p = simulate_homogeneous(&m, &pi, 50.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            let obs = discretize(&p, &grid, "x").unwrap();
            for (t, s) in obs.times.iter().zip(&obs.states) {
                if s.is_absorbing(3) {
                    assert!(*t >= p.absorption_time().unwrap());
                } else {
                    assert_eq!(*s, p.state_at(*t));
                    assert!(*t <= p.end);
                }
            }
        }
    }

    #[test]
    fn gompertz_study_panel_absorbed_paths_end_in_absorbing_state() {
        let (m, pi) = gompertz_study();
        let f = ScalingFamily::new(FamilyKind::Gompertz, 0.1019).unwrap();
        let rs = RandomStream::new(16);
        let grid = regular_grid(1.0, 60.0).unwrap();
        let mut absorbed = 0;
        for k in 0..1000 {
            let p = simulate_inhomogeneous(&m, &pi, &f, 60.0, &mut rs.substream(Purpose::Simulate, k, 0, 0)).unwrap();
            let obs = discretize(&p, &grid, k.to_string()).unwrap();
            if p.absorbed {
                absorbed += 1;
                assert_eq!(obs.last_state().number(), 4);
                let t = obs.last_time();
                assert!(t >= p.end && t - p.end < 1.0);
            } else {
                assert!(obs.states.iter().all(|s| s.number() <= 3));
                assert_eq!(obs.last_time(), 60.0);
            }
        }
        assert!(absorbed > 950);
    }

    #[test]
    fn short_bridge_has_no_interior_jumps() {
        let (m, _) = weibull_study();
        let chain = JumpChain::new(&m);
        let mut rng = RandomStream::new(17).substream(Purpose::Sem, 0, 0, 0);
        let mut jumpless = 0;
        for _ in 0..1000 {
            let b = chain.bridge(1.0, StateId(1), 1.0 + 1e-6, StateId(1), &mut rng, 100).unwrap();
            assert_eq!(b.path.initial_state(), StateId(1));
            assert_eq!(b.path.final_state(), StateId(1));
            if b.path.jump_count() == 0 {
                jumpless += 1;
            }
        }
        assert_eq!(jumpless, 1000);
    }

    #[test]
    fn absorption_bridge_acceptance_rate() {
        let m = gen(1, &[-1.0]);
        let chain = JumpChain::new(&m);
        let mut rng = RandomStream::new(18).substream(Purpose::Sem, 0, 0, 0);
        let mut attempts = 0u64;
        let mut accepted = 0u64;
        while attempts < 100_000 {
            let b = chain.bridge(0.0, StateId(0), 1.0, StateId(1), &mut rng, 1000).unwrap();
            attempts += b.attempts;
            accepted += 1;
            assert!(b.path.absorbed);
            let t = b.path.absorption_time().unwrap();
            assert!(t > 0.0 && t <= 1.0);
        }
        let rate = accepted as f64 / attempts as f64;
        assert!((rate - (1.0 - (-1.0f64).exp())).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn impossible_bridge_exhausts_budget() {
        // state 2 can never be entered from state 1
        let m = gen(2, &[-1.0, 0.0, 0.5, -1.0]);
        let mut rng = RandomStream::new(19).substream(Purpose::Sem, 0, 0, 0);
        let err = bridge_sample(&m, 0.0, StateId(0), 1.0, StateId(1), &mut rng, 500).unwrap_err();
        assert!(matches!(err, Error::BridgeBudget { attempts: 500, from: 1, to: 2, .. }));
    }

    #[test]
    fn bridge_endpoints_and_ordering() {
        let (m, _) = gompertz_study();
        let chain = JumpChain::new(&m);
        let rs = RandomStream::new(20);
        for k in 0..500u64 {
            let x = StateId((k % 3) as usize);
            let y = StateId(((k / 3) % 4) as usize);
            let mut rng = rs.substream(Purpose::Sem, k, 0, 0);
            let b = chain.bridge(2.0, x, 9.0, y, &mut rng, 1_000_000).unwrap();
            assert_eq!(b.path.initial_state(), x);
            assert_eq!(b.path.final_state(), y);
            assert_eq!(b.path.times[0], 2.0);
            for w in b.path.times.windows(2) {
                assert!(w[1] > w[0]);
            }
            assert!(*b.path.times.last().unwrap() <= 9.0);
        }
    }

    #[test]
    fn censored_completion() {
        let m = gen(1, &[-1.0]);
        let mut rng = RandomStream::new(21).substream(Purpose::Sem, 0, 0, 0);
        let k = 100_000;
        let mut sum = 0.0;
        for _ in 0..k {
            let p = complete_censored(&m, StateId(0), &mut rng).unwrap();
            assert_eq!(p.jump_count(), 1);
            sum += p.end;
        }
        assert!((sum / k as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn censored_completion_mean_matches_fundamental_matrix() {
        let m = gen(
            3,
            &[-0.2068, 0.1015, 0.0130, 0.0833, -0.3452, 0.1984, 0.0144, 0.0217, -0.1445],
        );
        // (-Λ⁻¹ 1)_3 computed independently by LU solve
        let want = {
            let neg = -m.rates().clone();
            neg.lu().solve(&nalgebra::DVector::from_element(3, 1.0)).unwrap()[2]
        };
        assert!((want - 9.668_647_148_94).abs() < 1e-8);
        let mut rng = RandomStream::new(22).substream(Purpose::Sem, 0, 0, 0);
        let k = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..k {
            let t = complete_censored(&m, StateId(2), &mut rng).unwrap().end;
            sum += t;
            sum2 += t * t;
        }
        let mean = sum / k as f64;
        let se = ((sum2 / k as f64 - mean * mean) / k as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want}");
    }

    #[test]
    fn censored_completion_single_jump_when_only_exit_is_absorption() {
        let m = gen(2, &[-2.0, 0.0, 1.0, -1.0]);
        let mut rng = RandomStream::new(23).substream(Purpose::Sem, 0, 0, 0);
        for _ in 0..100 {
            let p = complete_censored(&m, StateId(0), &mut rng).unwrap();
            assert_eq!(p.jump_count(), 1);
            assert!(p.absorbed);
        }
        let m = gen(2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(matches!(
            complete_censored(&m, StateId(0), &mut rng),
            Err(Error::Unreachable { state: 1 })
        ));
    }

    #[test]
    fn regular_grid_includes_horizon() {
        let g = regular_grid(0.1, 5.0).unwrap();
        assert_eq!(g.len(), 51);
        assert!((g[50] - 5.0).abs() < 1e-12);
        assert_eq!(regular_grid(1.0, 60.0).unwrap().len(), 61);
    }
}
