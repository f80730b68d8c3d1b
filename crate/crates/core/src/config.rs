//! Run configuration, read from TOML.
//!
//! ```toml
//! [model]
//! n = 2
//! family = "weibull"        # gompertz | weibull | homogeneous
//! beta = 3.0                # true parameters, needed by `simulate` and `study`
//! pi = [0.5, 0.5]
//! lambda = [[-3.0, 0.1], [0.01, -0.1]]
//!
//! [estimation]
//! beta0 = 2.0
//! eta = 1e-4
//! e_ell = 0.01
//! seed = 7
//!
//! [study]
//! k = 1000
//! horizon = 5.0
//! delta = 0.1               # or times_file = "grid.csv"
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::generator::{InitialDistribution, SubIntensityMatrix};
use crate::likelihood::GdSettings;
use crate::model::TimeScaledModel;
use crate::scaling::{FamilyKind, ScalingFamily};
use crate::sem::FitConfig;
use crate::sim::regular_grid;

pub const SEED_ENV: &str = "IPHSEM_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Seed precedence: command line, config file, environment, default.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = cli.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub n: usize,
    pub family: String,
    pub beta: Option<f64>,
    pub pi: Option<Vec<f64>>,
    pub lambda: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationBlock {
    pub beta0: f64,
    pub eta: f64,
    pub e_ell: f64,
    pub beta_min: f64,
    pub max_sem_iterations: usize,
    pub max_gd_steps: usize,
    pub max_bridge_attempts: u64,
    pub seed: Option<u64>,
    pub homogeneous: bool,
    pub homog_iterations: usize,
    pub homog_tail_average: usize,
}

impl Default for EstimationBlock {
    fn default() -> Self {
        let fit = FitConfig::default();
        EstimationBlock {
            beta0: fit.beta0,
            eta: fit.gd.eta,
            e_ell: fit.gd.e_ell,
            beta_min: fit.gd.beta_min,
            max_sem_iterations: fit.max_iterations,
            max_gd_steps: fit.gd.max_steps,
            max_bridge_attempts: fit.max_bridge_attempts,
            seed: None,
            homogeneous: false,
            homog_iterations: fit.homogeneous_iterations,
            homog_tail_average: fit.homogeneous_tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    pub k: usize,
    pub horizon: f64,
    pub delta: Option<f64>,
    pub times_file: Option<PathBuf>,
    /// horizons compared by the censoring study; defaults to `[horizon]`
    pub horizons: Option<Vec<f64>>,
    /// one replicate per seed; defaults to the resolved run seed
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub estimation: EstimationBlock,
    pub study: Option<StudyBlock>,
    /// directory relative paths are resolved against
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.model.n == 0 {
            return Err(Error::Config("model.n must be at least 1".into()));
        }
        self.family()?;
        self.fit_config(0)?.validate()?;
        if let Some(s) = &self.study {
            if !(s.horizon.is_finite() && s.horizon > 0.0) {
                return Err(Error::Config(format!("study.horizon must be > 0, got {}", s.horizon)));
            }
            match (s.delta, &s.times_file) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config("study takes either delta or times_file, not both".into()))
                }
                (None, None) => return Err(Error::Config("study needs delta or times_file".into())),
                (Some(d), None) if !(d.is_finite() && d > 0.0) => {
                    return Err(Error::Config(format!("study.delta must be > 0, got {d}")))
                }
                _ => {}
            }
            if let Some(h) = &s.horizons {
                if h.is_empty() || h.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(Error::Config("study.horizons must be non-empty and positive".into()));
                }
            }
        }
        Ok(())
    }

    /// The model family; `homogeneous = true` forces the identity clock.
    pub fn family(&self) -> Result<FamilyKind> {
        let kind: FamilyKind = self
            .model
            .family
            .parse()
            .map_err(|_| Error::Config(format!("unknown family '{}'", self.model.family)))?;
        Ok(if self.estimation.homogeneous {
            FamilyKind::Identity
        } else {
            kind
        })
    }

    pub fn resolve_seed(&self, cli: Option<u64>) -> Result<u64> {
        resolve_seed(cli, self.estimation.seed)
    }

    pub fn fit_config(&self, seed: u64) -> Result<FitConfig> {
        let e = &self.estimation;
        Ok(FitConfig {
            family: self.family()?,
            beta0: e.beta0,
            gd: GdSettings {
                eta: e.eta,
                e_ell: e.e_ell,
                beta_min: e.beta_min,
                max_steps: e.max_gd_steps,
            },
            max_iterations: e.max_sem_iterations,
            max_bridge_attempts: e.max_bridge_attempts,
            seed,
            homogeneous_iterations: e.homog_iterations,
            homogeneous_tail: e.homog_tail_average,
            keep_paths: false,
        })
    }

    /// The true model given in the `[model]` block.
    pub fn truth(&self) -> Result<TimeScaledModel> {
        let m = &self.model;
        let kind: FamilyKind = m
            .family
            .parse()
            .map_err(|_| Error::Config(format!("unknown family '{}'", m.family)))?;
        let family = match (kind, m.beta) {
            (FamilyKind::Identity, _) => ScalingFamily::identity(),
            (k, Some(b)) => ScalingFamily::new(k, b).map_err(|e| Error::Config(e.to_string()))?,
            (_, None) => return Err(Error::Config("model.beta is required to simulate".into())),
        };
        let pi = m
            .pi
            .clone()
            .ok_or_else(|| Error::Config("model.pi is required to simulate".into()))?;
        let rows = m
            .lambda
            .as_ref()
            .ok_or_else(|| Error::Config("model.lambda is required to simulate".into()))?;
        if pi.len() != m.n || rows.len() != m.n || rows.iter().any(|r| r.len() != m.n) {
            return Err(Error::Config(format!("model.pi and model.lambda must have n = {} states", m.n)));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        TimeScaledModel::new(
            family,
            InitialDistribution::new(pi)?,
            SubIntensityMatrix::new(DMatrix::from_row_slice(m.n, m.n, &flat))?,
        )
    }

    pub fn study(&self) -> Result<&StudyBlock> {
        self.study
            .as_ref()
            .ok_or_else(|| Error::Config("a [study] block is required".into()))
    }

    /// Observation grid on `[0, horizon]`.
    pub fn grid(&self, horizon: f64) -> Result<Vec<f64>> {
        let s = self.study()?;
        if let Some(d) = s.delta {
            return regular_grid(d, horizon);
        }
        let path = self.base_dir.join(s.times_file.as_ref().expect("validated"));
        let times = crate::io::read_samples(&path)?;
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "{}: grid must start at 0 and increase",
                path.display()
            )));
        }
        Ok(times.into_iter().filter(|&t| t <= horizon).collect())
    }
}
