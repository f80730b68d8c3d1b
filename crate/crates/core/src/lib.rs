//! Estimation of time-scaled inhomogeneous phase-type models from panel data
//! by stochastic EM with Markov-bridge imputation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod expm;
pub mod generator;
pub mod gof;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod panel;
pub mod report;
pub mod scaling;
pub mod sem;
pub mod sim;
pub mod study;

#[cfg(test)]
mod testutil;

pub use error::{Error, ErrorClass, Result};
pub use nalgebra;
pub use config::RunConfig;
pub use generator::{InitialDistribution, StateId, SubIntensityMatrix};
pub use model::TimeScaledModel;
pub use panel::{PanelObservationSet, PanelPath};
pub use scaling::{FamilyKind, ScalingFamily};
