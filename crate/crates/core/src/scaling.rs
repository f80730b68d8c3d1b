//! Scaling functions `h_β` and the induced change of clock between the
//! inhomogeneous timeline `t` and the homogeneous timeline `s = g⁻¹(t)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `h(t) = exp(βt)`
    Gompertz,
    /// `h(t) = β t^(β-1)`
    Weibull,
    /// `h(t) = 1`; the homogeneous model, β plays no role.
    Identity,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gompertz => "gompertz",
            FamilyKind::Weibull => "weibull",
            FamilyKind::Identity => "homogeneous",
        }
    }

    pub fn with_beta(self, beta: f64) -> Result<ScalingFamily> {
        ScalingFamily::new(self, beta)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gompertz" => Ok(FamilyKind::Gompertz),
            "weibull" => Ok(FamilyKind::Weibull),
            "homogeneous" | "identity" => Ok(FamilyKind::Identity),
            other => Err(Error::Config(format!(
                "unknown family '{other}' (expected gompertz, weibull or homogeneous)"
            ))),
        }
    }
}

/// A member of a scaling family with its parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFamily {
    kind: FamilyKind,
    beta: f64,
}

impl ScalingFamily {
    pub fn new(kind: FamilyKind, beta: f64) -> Result<Self> {
        if kind != FamilyKind::Identity && !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!(
                "{kind} scaling needs beta > 0, got {beta}"
            )));
        }
        Ok(ScalingFamily { kind, beta })
    }

    pub fn identity() -> Self {
        ScalingFamily {
            kind: FamilyKind::Identity,
            beta: 1.0,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(())
    }

    /// Weibull with β < 1 has an infinite intensity at the origin.
    fn check_intensity_time(&self, t: f64) -> Result<()> {
        self.check_time(t)?;
        if self.kind == FamilyKind::Weibull && t == 0.0 && self.beta < 1.0 {
            return Err(Error::Domain(format!(
                "weibull intensity is infinite at t = 0 for beta = {} < 1",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn h(&self, t: f64) -> Result<f64> {
        self.check_intensity_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => (self.beta * t).exp(),
            FamilyKind::Weibull => self.beta * t.powf(self.beta - 1.0),
            FamilyKind::Identity => 1.0,
        })
    }

    /// `log h(t)`, evaluated without forming `h` first.
    pub fn log_h(&self, t: f64) -> Result<f64> {
        self.check_intensity_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => self.beta * t,
            FamilyKind::Weibull => self.beta.ln() + (self.beta - 1.0) * t.ln(),
            FamilyKind::Identity => 0.0,
        })
    }

    pub fn dh_dbeta(&self, t: f64) -> Result<f64> {
        self.check_intensity_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => t * (self.beta * t).exp(),
            FamilyKind::Weibull => {
                if t == 0.0 {
                    if self.beta > 1.0 {
                        0.0
                    } else {
                        return Err(Error::Domain(
                            "d/dbeta of the weibull intensity is unbounded at t = 0 for beta <= 1"
                                .into(),
                        ));
                    }
                } else {
                    t.powf(self.beta - 1.0) * (1.0 + self.beta * t.ln())
                }
            }
            FamilyKind::Identity => 0.0,
        })
    }

    /// `(∂h/∂β) / h`, the score contribution of the intensity factor.
    pub fn dlog_h_dbeta(&self, t: f64) -> Result<f64> {
        self.check_intensity_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => t,
            FamilyKind::Weibull => {
                if t == 0.0 {
                    return Err(Error::Domain(
                        "weibull score is unbounded at t = 0".into(),
                    ));
                }
                1.0 / self.beta + t.ln()
            }
            FamilyKind::Identity => 0.0,
        })
    }

    /// Homogeneous clock `g⁻¹(t) = ∫₀ᵗ h(u) du`.
    pub fn g_inv(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => (self.beta * t).exp_m1() / self.beta,
            FamilyKind::Weibull => t.powf(self.beta),
            FamilyKind::Identity => t,
        })
    }

    /// Inverse of [`g_inv`](Self::g_inv): maps homogeneous time back.
    pub fn g(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("homogeneous time must be >= 0, got {s}")));
        }
        if s.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(match self.kind {
            FamilyKind::Gompertz => (self.beta * s).ln_1p() / self.beta,
            FamilyKind::Weibull => s.powf(1.0 / self.beta),
            FamilyKind::Identity => s,
        })
    }

    /// `∫₀ᵗ ∂h/∂β du = ∂g⁻¹(t)/∂β`, in closed form.
    pub fn dg_inv_dbeta(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self.kind {
            FamilyKind::Gompertz => gompertz_integrated_derivative(self.beta, t),
            FamilyKind::Weibull => {
                if t == 0.0 {
                    // t^β ln t -> 0
                    0.0
                } else {
                    t.powf(self.beta) * t.ln()
                }
            }
            FamilyKind::Identity => 0.0,
        })
    }
}

/// `t e^{βt}/β - (e^{βt}-1)/β²`. For small `βt` the two terms cancel, so the
/// series `t² Σ_{k≥2} (k-1) (βt)^{k-2} / k!` is used instead.
fn gompertz_integrated_derivative(beta: f64, t: f64) -> f64 {
    let u = beta * t;
    if u.abs() < 0.5 {
        let mut sum = 0.0;
        let mut power = 1.0; // u^(k-2)
        let mut fact = 2.0; // k!
        for k in 2..40u32 {
            let term = (k - 1) as f64 * power / fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            power *= u;
            fact *= (k + 1) as f64;
        }
        t * t * sum
    } else {
        t * u.exp() / beta - u.exp_m1() / (beta * beta)
    }
}
