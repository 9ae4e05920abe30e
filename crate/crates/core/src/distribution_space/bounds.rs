//! Empirical constants for the two norm bounds on translates:
//! `sup_x ‖δ_x‖_{−p} < ∞` for `p > d/4` and
//! `‖τ_x φ‖_{−q} <= P(|x|) ‖φ‖_{−q}` for a polynomial `P`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::delta::{DeltaFamily, NormEstimate};
use super::expansion::{norm_p, shared_truncation, translate, HermiteExpansion};

/// `‖δ_x‖_{−p}` over a grid of locations on the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaNormSweep {
    pub p: f64,
    pub max_order: usize,
    pub locations: Vec<f64>,
    pub norms: Vec<NormEstimate>,
}

impl DeltaNormSweep {
    /// Index and value of the largest tail-corrected norm.
    pub fn max_total(&self) -> (usize, f64) {
        self.norms.iter().map(NormEstimate::total).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
        )
    }

    pub fn max_truncated(&self) -> (usize, f64) {
        self.norms.iter().map(|n| n.truncated).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
        )
    }
}

/// Evaluates `‖δ_x‖_{−p}` for `x = (t, 0, …, 0)`, `t ∈ locations`.
pub fn delta_norm_sweep(
    dimension: usize,
    p: f64,
    locations: &[f64],
    max_order: usize,
) -> Result<DeltaNormSweep> {
    let norms = locations
        .par_iter()
        .map(|&t| {
            let mut x = vec![0.0; dimension];
            x[0] = t;
            DeltaFamily::new(x)?.norm(-p, max_order)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaNormSweep {
        p,
        max_order,
        locations: locations.to_vec(),
        norms,
    })
}

/// Upper-bounding polynomial in `|x|` for sampled norm ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBound {
    /// Ascending coefficients; the constant term is lifted so the fit
    /// dominates every sample.
    pub coefficients: Vec<f64>,
    /// Largest `ratio / P(|x|)` on held-out points (at most 1 when the
    /// bound generalizes).
    pub holdout_max_ratio: f64,
}

impl PolynomialBound {
    pub fn eval(&self, r: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c)
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// Least-squares polynomial fit of `values` against `radii`, lifted to an
/// upper bound.
pub fn fit_upper_polynomial(radii: &[f64], values: &[f64], degree: usize) -> Result<Vec<f64>> {
    if radii.len() != values.len() || radii.len() <= degree {
        return Err(Error::InvalidArgument(format!(
            "need more than {degree} samples for a degree-{degree} fit"
        )));
    }
    let a = DMatrix::from_fn(radii.len(), degree + 1, |i, j| radii[i].powi(j as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let fitted = &a * &coef;
    let lift = values
        .iter()
        .zip(fitted.iter())
        .map(|(v, f)| v - f)
        .fold(0.0f64, f64::max);
    let mut out: Vec<f64> = coef.iter().copied().collect();
    out[0] += lift;
    Ok(out)
}

/// Fits `‖τ_x φ‖_{−q} / ‖φ‖_{−q} <= P(|x|)` with `deg P = 2(⌊q⌋ + 1)` on a
/// one-dimensional grid, checking the fit on the grid midpoints.
pub fn translation_bound(phi: &HermiteExpansion, q: f64, grid: &[f64]) -> Result<PolynomialBound> {
    if phi.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: phi.dimension(),
        });
    }
    let degree = 2 * (q.floor().max(0.0) as usize + 1);
    let base = norm_p(phi, -q);
    let ratio = |x: f64| -> Result<f64> {
        // enough room for the translated profile
        let n = phi.max_order().max((3.0 * x * x + 40.0).ceil() as usize);
        let wide = phi.resized(n)?;
        Ok(norm_p(&translate(&wide, &[x])?.value, -q) / base)
    };
    let values = grid
        .par_iter()
        .map(|&x| ratio(x))
        .collect::<Result<Vec<_>>>()?;
    let radii: Vec<f64> = grid.iter().map(|x| x.abs()).collect();
    let coefficients = fit_upper_polynomial(&radii, &values, degree)?;
    let bound = PolynomialBound {
        coefficients,
        holdout_max_ratio: 0.0,
    };
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let worst = mids
        .par_iter()
        .map(|&x| Ok(ratio(x)? / bound.eval(x.abs())))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok(PolynomialBound {
        holdout_max_ratio: worst,
        ..bound
    })
}

/// Ground state `h_0` as an expansion of order `max_order`.
pub fn ground_state(dimension: usize, max_order: usize) -> Result<HermiteExpansion> {
    HermiteExpansion::basis_element(
        shared_truncation(dimension, max_order)?,
        &vec![0; dimension],
    )
}
