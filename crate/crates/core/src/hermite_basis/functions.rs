//! L²-normalized Hermite functions
//! `h_n(x) = (2^n n! √π)^{-1/2} H_n(x) e^{-x²/2}`
//! evaluated with the three-term recurrence
//! `h_{k+1} = x √(2/(k+1)) h_k − √(k/(k+1)) h_{k−1}`.
//!
//! For `|x|` large enough that `h_0(x)` underflows the recurrence runs on
//! mantissas with a separately tracked logarithmic scale.

use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::MultiIndex;

const TABLE_LEN: usize = 4096;
/// Above this value of `x²/2` the seed `e^{-x²/2}` is treated as unsafe.
const DIRECT_SEED_LIMIT: f64 = 600.0;
const RESCALE_ABOVE: f64 = 1e250;
const LN_RESCALE: f64 = 575.646_273_248_511_4; // 250 ln 10

fn recurrence_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..TABLE_LEN)
            .map(|k| {
                let kf = k as f64;
                ((2.0 / (kf + 1.0)).sqrt(), (kf / (kf + 1.0)).sqrt())
            })
            .collect()
    })
}

#[inline]
fn coefficients(k: usize) -> (f64, f64) {
    if k < TABLE_LEN {
        recurrence_table()[k]
    } else {
        let kf = k as f64;
        ((2.0 / (kf + 1.0)).sqrt(), (kf / (kf + 1.0)).sqrt())
    }
}

/// `ln h_0(x)` without the sign.
#[inline]
fn ln_seed(x: f64) -> f64 {
    -0.5 * x * x - 0.25 * std::f64::consts::PI.ln()
}

/// Value of `h_n(x)`.
pub fn hermite_eval(n: usize, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite("hermite argument"));
    }
    let (hn, _, ln_scale) = scaled_pair(n, x);
    Ok(finish(hn, ln_scale))
}

/// Signed-order front end that rejects negative orders explicitly.
pub fn hermite_eval_checked(n: i64, x: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!(
            "Hermite order must be non-negative, got {n}"
        )));
    }
    hermite_eval(n as usize, x)
}

/// Fills `out` with `h_0(x), ..., h_max(x)`.
pub fn hermite_eval_all(max_n: usize, x: f64, out: &mut Vec<f64>) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite("hermite argument"));
    }
    out.clear();
    out.reserve(max_n + 1);
    let ln0 = ln_seed(x);
    if -ln0 < DIRECT_SEED_LIMIT {
        let mut prev = 0.0;
        let mut cur = ln0.exp();
        out.push(cur);
        for k in 0..max_n {
            let (a, b) = coefficients(k);
            let next = x * a * cur - b * prev;
            prev = cur;
            cur = next;
            out.push(cur);
        }
        return Ok(());
    }
    let mut ln_scale = ln0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(finish(cur, ln_scale));
    for k in 0..max_n {
        let (a, b) = coefficients(k);
        let mut next = x * a * cur - b * prev;
        prev = cur;
        if next.abs() > RESCALE_ABOVE {
            next *= 1e-250;
            prev *= 1e-250;
            ln_scale += LN_RESCALE;
        }
        cur = next;
        out.push(finish(cur, ln_scale));
    }
    Ok(())
}

/// Allocating convenience wrapper around [`hermite_eval_all`].
pub fn hermite_values(max_n: usize, x: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    hermite_eval_all(max_n, x, &mut out)?;
    Ok(out)
}

/// Tensor-product Hermite function `Π_i h_{n_i}(x_i)`.
pub fn hermite_eval_multi(n: &MultiIndex, x: &[f64]) -> Result<f64> {
    if n.dimension() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: n.dimension(),
            found: x.len(),
        });
    }
    n.entries().iter().zip(x).try_fold(1.0, |acc, (&ni, &xi)| {
        Ok(acc * hermite_eval(ni as usize, xi)?)
    })
}

/// `(m_n, m_{n-1}, s)` with `h_n(x) = m_n e^s` and `h_{n-1}(x) = m_{n-1} e^s`.
pub(crate) fn scaled_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let mut ln_scale = ln_seed(x);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let (a, b) = coefficients(k);
        let mut next = x * a * cur - b * prev;
        prev = cur;
        if next.abs() > RESCALE_ABOVE {
            next *= 1e-250;
            prev *= 1e-250;
            ln_scale += LN_RESCALE;
        }
        cur = next;
    }
    (cur, prev, ln_scale)
}

#[inline]
fn finish(mantissa: f64, ln_scale: f64) -> f64 {
    if mantissa == 0.0 {
        return 0.0;
    }
    let ln = mantissa.abs().ln() + ln_scale;
    ln.exp().copysign(mantissa)
}

/// `h_n'(x) = √(n/2) h_{n−1}(x) − √((n+1)/2) h_{n+1}(x)`.
pub fn hermite_derivative(n: usize, x: f64) -> Result<f64> {
    let v = hermite_values(n + 1, x)?;
    let lower = if n > 0 { v[n - 1] } else { 0.0 };
    Ok((n as f64 / 2.0).sqrt() * lower - ((n as f64 + 1.0) / 2.0).sqrt() * v[n + 1])
}

/// `h_n''(x) = (x² − 2n − 1) h_n(x)`.
pub fn hermite_second_derivative(n: usize, x: f64) -> Result<f64> {
    Ok((x * x - 2.0 * n as f64 - 1.0) * hermite_eval(n, x)?)
}
