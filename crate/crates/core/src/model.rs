//! A fully specified time-scaled phase-type model.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{InitialDistribution, SubIntensityMatrix};
use crate::likelihood::{iph_cdf, iph_density};
use crate::scaling::ScalingFamily;
use crate::sim::{simulate_inhomogeneous, ContinuousPath, Purpose, RandomStream};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeScaledModel {
    pub family: ScalingFamily,
    pub pi: InitialDistribution,
    pub lambda: SubIntensityMatrix,
}

impl TimeScaledModel {
    pub fn new(family: ScalingFamily, pi: InitialDistribution, lambda: SubIntensityMatrix) -> Result<Self> {
        if pi.n() != lambda.n() {
            return Err(Error::Config(format!(
                "initial distribution has {} states but the generator has {}",
                pi.n(),
                lambda.n()
            )));
        }
        Ok(TimeScaledModel { family, pi, lambda })
    }

    pub fn n(&self) -> usize {
        self.lambda.n()
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        iph_density(&self.family, &self.pi, &self.lambda, t)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        iph_cdf(&self.family, &self.pi, &self.lambda, t)
    }

    /// Path `index` of the stream, run to `horizon` on the inhomogeneous clock.
    pub fn simulate(&self, stream: &RandomStream, purpose: Purpose, index: u64, horizon: f64) -> Result<ContinuousPath> {
        let mut rng = stream.substream(purpose, index, 0, 0);
        simulate_inhomogeneous(&self.lambda, &self.pi, &self.family, horizon, &mut rng)
    }

    /// `count` independent absorption times, in index order.
    pub fn sample_absorption_times(&self, stream: &RandomStream, purpose: Purpose, count: usize) -> Result<Vec<f64>> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.simulate(stream, purpose, i, f64::INFINITY).map(|p| p.end))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}
