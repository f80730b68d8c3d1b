//! Sub-intensity matrices, initial distributions and state identifiers.

use std::fmt;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-12;

/// A state of the process, stored 0-based.
///
/// Transient states are `0..n`, the absorbing state is `n`. Everything that
/// leaves the library (files, CLI output, error messages) uses the 1-based
/// numbering `1..=n+1` via [`StateId::number`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl StateId {
    pub fn from_number(number: usize) -> Option<Self> {
        number.checked_sub(1).map(StateId)
    }

    pub fn number(self) -> usize {
        self.0 + 1
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn absorbing(n: usize) -> Self {
        StateId(n)
    }

    pub fn is_absorbing(self, n: usize) -> bool {
        self.0 == n
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    NonFinite { row: usize, col: usize },
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    PositiveDiagonal { row: usize, value: f64 },
    PositiveRowSum { row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-based positions in messages
        match *self {
            Violation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite entry at ({}, {})", row + 1, col + 1)
            }
            Violation::NegativeOffDiagonal { row, col, value } => write!(
                f,
                "negative off-diagonal {value} at ({}, {})",
                row + 1,
                col + 1
            ),
            Violation::PositiveDiagonal { row, value } => {
                write!(f, "positive diagonal {value} at ({0}, {0})", row + 1)
            }
            Violation::PositiveRowSum { row, sum } => {
                write!(f, "row {} sums to {sum} > 0", row + 1)
            }
        }
    }
}

/// Outcome of [`validate_generator`]: hard violations plus advisory warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks the structural constraints of a sub-intensity matrix without
/// failing: off-diagonals nonnegative, diagonal nonpositive, row sums <= 0.
pub fn validate_generator(m: &DMatrix<f64>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !m.is_square() {
        report.violations.push(Violation::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
        return report;
    }
    let n = m.nrows();
    for i in 0..n {
        let mut finite_row = true;
        let mut scale = 0.0f64;
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                report.violations.push(Violation::NonFinite { row: i, col: j });
                finite_row = false;
                continue;
            }
            scale = scale.max(v.abs());
            if i != j && v < 0.0 {
                report
                    .violations
                    .push(Violation::NegativeOffDiagonal { row: i, col: j, value: v });
            }
        }
        let d = m[(i, i)];
        if d.is_finite() && d > 0.0 {
            report
                .violations
                .push(Violation::PositiveDiagonal { row: i, value: d });
        }
        if finite_row {
            let sum: f64 = m.row(i).sum();
            if sum > ROW_SUM_TOL * scale.max(1.0) {
                report
                    .violations
                    .push(Violation::PositiveRowSum { row: i, sum });
            } else if d == 0.0 {
                report.warnings.push(format!(
                    "state {} is absorbing-in-disguise (no exit rate)",
                    i + 1
                ));
            }
        }
    }
    report
}

/// The transient block of a phase-type generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SubIntensityMatrix {
    rates: DMatrix<f64>,
    exit: DVector<f64>,
}

impl SubIntensityMatrix {
    pub fn new(rates: DMatrix<f64>) -> Result<Self> {
        let report = validate_generator(&rates);
        if !report.is_valid() {
            return Err(Error::InvalidGenerator(report));
        }
        let exit = DVector::from_iterator(
            rates.nrows(),
            rates.row_iter().map(|r| (-r.sum()).max(0.0)),
        );
        Ok(SubIntensityMatrix { rates, exit })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGenerator(ValidationReport {
                violations: vec![Violation::NotSquare {
                    rows: n,
                    cols: rows.iter().map(Vec::len).max().unwrap_or(0),
                }],
                warnings: vec![],
            }));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }

    /// Builds a generator from off-diagonal rates and exit rates; the diagonal
    /// is set so each full-generator row sums to zero.
    pub fn from_rates(off_diagonal: &DMatrix<f64>, exit: &[f64]) -> Result<Self> {
        let n = exit.len();
        let mut rates = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut total = exit[i];
            for j in 0..n {
                if i != j {
                    rates[(i, j)] = off_diagonal[(i, j)];
                    total += off_diagonal[(i, j)];
                }
            }
            rates[(i, i)] = -total;
        }
        Self::new(rates)
    }

    pub fn n(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    /// Exit vector `-Λ·1`, clamped at zero against rounding.
    pub fn exit_rates(&self) -> &DVector<f64> {
        &self.exit
    }

    pub fn total_rate(&self, state: usize) -> f64 {
        -self.rates[(state, state)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rates
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Whether the absorbing state can be reached from `state` through
    /// positive-rate transitions.
    pub fn can_absorb_from(&self, state: usize) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![state];
        seen[state] = true;
        while let Some(x) = stack.pop() {
            if self.exit[x] > 0.0 {
                return true;
            }
            for y in 0..n {
                if y != x && !seen[y] && self.rates[(x, y)] > 0.0 {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        false
    }
}

/// Exit rates of a sub-intensity matrix, `λ = -Λ·1`.
pub fn exit_rates(m: &SubIntensityMatrix) -> DVector<f64> {
    m.exit_rates().clone()
}

/// Initial distribution over the transient states.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    probs: RowDVector<f64>,
}

impl InitialDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {} is {}",
                i + 1,
                probs[i]
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(InitialDistribution {
            probs: RowDVector::from_vec(probs),
        })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn as_row(&self) -> &RowDVector<f64> {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.probs.iter().copied().collect()
    }
}
