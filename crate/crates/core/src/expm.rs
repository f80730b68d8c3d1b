//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005), plus a log-scaled variant for arguments whose
//! exponential would under- or overflow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(t * m)` for a square matrix with finite entries and `t >= 0`.
pub fn matrix_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let a = scaled_argument(m, t)?;
    let (e, squarings) = pade_scaled(&a);
    let mut e = e;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

/// `exp(t * m)` returned as `(log_scale, normalized)` with
/// `exp(t * m) = exp(log_scale) * normalized` and `max |normalized| = 1`.
///
/// The squaring phase renormalizes after every product, so the result stays
/// representable even when `t * m` has a norm of 1e20 or more.
pub fn matrix_exponential_log_scaled(m: &DMatrix<f64>, t: f64) -> Result<(f64, DMatrix<f64>)> {
    let a = scaled_argument(m, t)?;
    let (mut e, squarings) = pade_scaled(&a);
    let mut log_scale = renormalize(&mut e);
    for _ in 0..squarings {
        e = &e * &e;
        log_scale = 2.0 * log_scale + renormalize(&mut e);
    }
    Ok((log_scale, e))
}

fn renormalize(e: &mut DMatrix<f64>) -> f64 {
    let peak = e.amax();
    if peak > 0.0 && peak.is_finite() {
        *e /= peak;
        peak.ln()
    } else {
        0.0
    }
}

fn scaled_argument(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Domain(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "matrix exponential time must be finite and nonnegative, got {t}"
        )));
    }
    for (idx, v) in m.iter().enumerate() {
        if !v.is_finite() {
            // column-major storage
            return Err(Error::NonFinite {
                row: idx % m.nrows(),
                col: idx / m.nrows(),
            });
        }
    }
    Ok(m * t)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Padé approximant of `exp(a / 2^s)` and the number of squarings `s`.
fn pade_scaled(a: &DMatrix<f64>) -> (DMatrix<f64>, u32) {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a = a * 0.5_f64.powi(squarings as i32);
    let b = &PADE_13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_tail = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * (&a6 * u_inner + u_tail);

    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let numerator = &v + &u;
    let denominator = &v - &u;
    let e = denominator
        .lu()
        .solve(&numerator)
        .expect("Pade denominator is nonsingular for ||A|| <= theta_13");
    (e, squarings)
}
