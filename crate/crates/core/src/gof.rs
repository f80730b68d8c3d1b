//! Empirical distribution functions and Kolmogorov-Smirnov tests.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A sorted sample of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    sorted: Vec<f64>,
}

impl SampleSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("sample contains non-finite value {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(SampleSet { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// `F̂(t)`, the fraction of values `<= t`.
    pub fn ecdf(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }

    /// The ECDF as a step table: each distinct value with `F̂` just after it.
    pub fn ecdf_steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }
}

/// Outcome of a two-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub n_a: usize,
    pub n_b: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// `sup_t |F̂_a(t) - F̂_b(t)|` over the pooled points, with the asymptotic
/// Kolmogorov p-value at `λ = D √(n_a n_b / (n_a + n_b))`.
pub fn ks_two_sample(a: &SampleSet, b: &SampleSet) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(format!(
            "KS test needs two non-empty samples, got sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let lambda = d * (na * nb / (na + nb)).sqrt();
    Ok(KsResult {
        n_a: xa.len(),
        n_b: xb.len(),
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    })
}

/// One-sample statistic against a continuous CDF, with the asymptotic p-value.
pub fn ks_one_sample(sample: &SampleSet, cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let x = sample.values();
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    (d, kolmogorov_sf(d * n.sqrt()))
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form, fast for small λ
        let c = PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=20 {
            let k = (2 * j - 1) as f64;
            let term = (-k * k * c).exp();
            s += term;
            if term < 1e-17 * s {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            s += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}
