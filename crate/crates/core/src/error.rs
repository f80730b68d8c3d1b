use thiserror::Error;

use crate::generator::ValidationReport;
use crate::likelihood::GdStep;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    NonConvergence,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sub-intensity matrix: {0}")]
    InvalidGenerator(ValidationReport),

    #[error("invalid initial distribution: {0}")]
    InvalidDistribution(String),

    #[error("non-finite entry in matrix at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bridge from state {from} to state {to} over duration {duration} rejected {attempts} times")]
    BridgeBudget {
        from: usize,
        to: usize,
        duration: f64,
        attempts: u64,
    },

    #[error("absorption is unreachable from state {state}")]
    Unreachable { state: usize },

    #[error("state {state} has zero occupation time; the data carry no information about it (consider merging or removing the state)")]
    StarvedState { state: usize },

    #[error("density underflows to zero at observation {index} (t = {time})")]
    DensityUnderflow { index: usize, time: f64 },

    #[error("gradient ascent did not converge within {} steps", .trace.len())]
    GdNonConvergence { trace: Box<Vec<GdStep>> },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {message}", .line.map(|l| format!("line {l}")).unwrap_or_else(|| "input".to_string()))]
    Input { line: Option<usize>, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(line: usize, message: impl Into<String>) -> Self {
        Error::Input {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::Iteration { .. } => e,
            other => Error::Iteration {
                iteration,
                source: Box::new(other),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidGenerator(_)
            | Error::InvalidDistribution(_)
            | Error::Domain(_)
            | Error::Input { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::StarvedState { .. } => ErrorClass::Input,
            Error::GdNonConvergence { .. } | Error::BridgeBudget { .. } => {
                ErrorClass::NonConvergence
            }
            Error::NonFinite { .. }
            | Error::Unreachable { .. }
            | Error::DensityUnderflow { .. } => ErrorClass::Numerical,
            Error::Iteration { source, .. } => source.class(),
        }
    }
}
