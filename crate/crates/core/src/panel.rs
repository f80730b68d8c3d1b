//! Discretely observed trajectories (panel data).

use crate::error::{Error, Result};
use crate::generator::StateId;

/// One discretely observed trajectory on the inhomogeneous timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelPath {
    pub id: String,
    pub times: Vec<f64>,
    pub states: Vec<StateId>,
}

impl PanelPath {
    pub fn new(id: impl Into<String>, times: Vec<f64>, states: Vec<StateId>) -> Self {
        PanelPath {
            id: id.into(),
            times,
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_state(&self) -> StateId {
        self.states[0]
    }

    pub fn last_state(&self) -> StateId {
        *self.states.last().expect("validated paths are non-empty")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("validated paths are non-empty")
    }

    pub fn is_absorbed(&self, n: usize) -> bool {
        self.last_state().is_absorbing(n)
    }

    fn validate(&self, n: usize) -> std::result::Result<(), String> {
        if self.times.is_empty() {
            return Err("path has no observations".into());
        }
        if self.times.len() != self.states.len() {
            return Err("times and states differ in length".into());
        }
        if self.times[0] != 0.0 {
            return Err(format!("first observation at {} instead of 0", self.times[0]));
        }
        if self.states[0].is_absorbing(n) {
            return Err("path starts in the absorbing state".into());
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(format!("non-increasing times {} then {}", w[0], w[1]));
            }
        }
        for (j, s) in self.states.iter().enumerate() {
            if s.index() > n {
                return Err(format!("state {} exceeds absorbing state {}", s, n + 1));
            }
            if s.is_absorbing(n) && j + 1 != self.states.len() {
                return Err(format!(
                    "absorbing state {} observed before the final observation",
                    n + 1
                ));
            }
        }
        Ok(())
    }
}

/// Panel data for `K` paths over `n` transient states.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservationSet {
    n: usize,
    paths: Vec<PanelPath>,
}

impl PanelObservationSet {
    pub fn new(n: usize, paths: Vec<PanelPath>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("need at least one transient state".into()));
        }
        for p in &paths {
            p.validate(n).map_err(|msg| Error::Input {
                line: None,
                message: format!("path '{}': {msg}", p.id),
            })?;
        }
        Ok(PanelObservationSet { n, paths })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn paths(&self) -> &[PanelPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn absorbed_count(&self) -> usize {
        self.paths.iter().filter(|p| p.is_absorbed(self.n)).count()
    }

    /// Recorded times of the absorbing observations.
    pub fn observed_absorption_times(&self) -> Vec<f64> {
        self.paths
            .iter()
            .filter(|p| p.is_absorbed(self.n))
            .map(|p| p.last_time())
            .collect()
    }

    /// Splits into the paths selected by `keep` and the rest, order preserved.
    pub fn partition(&self, keep: impl Fn(usize) -> bool) -> (Self, Self) {
        let (a, b): (Vec<_>, Vec<_>) = self
            .paths
            .iter()
            .cloned()
            .enumerate()
            .partition(|(i, _)| keep(*i));
        (
            PanelObservationSet {
                n: self.n,
                paths: a.into_iter().map(|(_, p)| p).collect(),
            },
            PanelObservationSet {
                n: self.n,
                paths: b.into_iter().map(|(_, p)| p).collect(),
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(k: usize) -> StateId {
        StateId::from_number(k).unwrap()
    }

    #[test]
    fn accepts_valid_paths() {
        let p = PanelPath::new("a", vec![0.0, 1.5], vec![s(1), s(4)]);
        let set = PanelObservationSet::new(3, vec![p]).unwrap();
        assert_eq!(set.absorbed_count(), 1);
        assert_eq!(set.observed_absorption_times(), vec![1.5]);
    }

    #[test]
    fn rejects_interior_absorption() {
        let p = PanelPath::new("a", vec![0.0, 1.0, 2.0], vec![s(1), s(3), s(1)]);
        assert!(PanelObservationSet::new(2, vec![p]).is_err());
    }

    #[test]
    fn rejects_bad_times_and_states() {
        let p = PanelPath::new("a", vec![0.0, 0.0], vec![s(1), s(2)]);
        assert!(PanelObservationSet::new(2, vec![p]).is_err());
        let p = PanelPath::new("a", vec![0.5], vec![s(1)]);
        assert!(PanelObservationSet::new(2, vec![p]).is_err());
        let p = PanelPath::new("a", vec![0.0, 1.0], vec![s(1), s(5)]);
        assert!(PanelObservationSet::new(2, vec![p]).is_err());
    }
}
