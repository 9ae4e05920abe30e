use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hermite_basis::{hermite_eval_all, BasisTruncation};
use crate::stats::CompensatedSum;

use super::expansion::{axis_tables, shared_truncation, HermiteExpansion, SobolevWeights};

/// Dirac delta `δ_x`, kept as a location until a truncation is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFamily {
    location: Vec<f64>,
}

/// Truncated sum plus the semiclassical estimate of the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub truncated: f64,
    /// Estimate of the squared-norm tail `Σ_{|n| > N}`; infinite when the
    /// series diverges.
    pub tail: f64,
}

impl NormEstimate {
    pub fn total(&self) -> f64 {
        (self.truncated * self.truncated + self.tail).sqrt()
    }
}

impl DeltaFamily {
    pub fn new(location: Vec<f64>) -> Result<Self> {
        if location.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if location.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("delta location"));
        }
        Ok(Self { location })
    }

    pub fn origin(dimension: usize) -> Result<Self> {
        Self::new(vec![0.0; dimension])
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }

    pub fn dimension(&self) -> usize {
        self.location.len()
    }

    /// `τ_x δ_y = δ_{x+y}`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: shift.len(),
            });
        }
        Self::new(
            self.location
                .iter()
                .zip(shift)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn materialize(
        &self,
        truncation: std::sync::Arc<BasisTruncation>,
    ) -> Result<HermiteExpansion> {
        delta_expansion(&self.location, truncation)
    }

    pub fn materialize_order(&self, max_order: usize) -> Result<HermiteExpansion> {
        self.materialize(shared_truncation(self.dimension(), max_order)?)
    }

    /// `Σ_{|n| <= N} w_{|n|} h_n(x)²` without materializing the expansion.
    pub fn squared_norm_truncated(&self, weights: &SobolevWeights) -> Result<f64> {
        let d = self.dimension();
        if weights.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: weights.dimension(),
            });
        }
        let n = weights.max_order();
        let w = weights.by_order();
        let mut acc = CompensatedSum::new();
        if d == 1 {
            let mut values = Vec::with_capacity(n + 1);
            hermite_eval_all(n, self.location[0], &mut values)?;
            for (k, v) in values.iter().enumerate() {
                acc.add(w[k] * v * v);
            }
            return Ok(acc.value());
        }
        let tables = axis_tables(n, &self.location)?;
        let t = shared_truncation(d, n)?;
        for (entries, k) in t.iter().zip(t.orders()) {
            let mut v = 1.0;
            for (axis, &e) in entries.iter().enumerate() {
                v *= tables[axis][e as usize];
            }
            acc.add(w[*k as usize] * v * v);
        }
        Ok(acc.value())
    }

    /// `‖δ_x‖_q` (q is the signed regularity, negative for deltas) from the
    /// truncation `N = max_order` plus an asymptotic tail.
    ///
    /// The tail replaces `Σ_{|n|=k} h_n(x)²` by its phase-space average
    /// `d ω_d (2k + d − |x|²)^{d/2−1} / (2π)^d` and integrates from
    /// `v = 2N + 1 + d` to infinity.
    pub fn norm(&self, q: f64, max_order: usize) -> Result<NormEstimate> {
        let weights = SobolevWeights::new(self.dimension(), max_order, q);
        let truncated = self.squared_norm_truncated(&weights)?.sqrt();
        let s: f64 = self.location.iter().map(|v| v * v).sum();
        Ok(NormEstimate {
            truncated,
            tail: delta_tail(self.dimension(), s, q, max_order),
        })
    }
}

/// Coefficients `⟨δ_x, h_n⟩ = h_n(x)`.
pub fn delta_expansion(
    x: &[f64],
    truncation: std::sync::Arc<BasisTruncation>,
) -> Result<HermiteExpansion> {
    let d = truncation.dimension();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("delta location"));
    }
    let tables = axis_tables(truncation.max_order(), x)?;
    let coeffs = truncation
        .iter()
        .map(|entries| {
            entries
                .iter()
                .enumerate()
                .map(|(axis, &e)| tables[axis][e as usize])
                .product()
        })
        .collect();
    HermiteExpansion::new(truncation, coeffs, -(d as f64) / 4.0)
}

/// `Γ(d/2 + 1)`.
fn gamma_half_dim_plus_one(d: usize) -> f64 {
    let mut g = if d.is_multiple_of(2) {
        1.0
    } else {
        PI.sqrt() / 2.0
    };
    let mut a = if d.is_multiple_of(2) { 1.0 } else { 1.5 };
    let target = d as f64 / 2.0 + 1.0;
    while a < target - 0.25 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Semiclassical tail `Σ_{|n| > N} (2|n|+d)^{2q} |h_n(x)|²` with `s = |x|²`.
pub fn delta_tail(d: usize, s: f64, q: f64, max_order: usize) -> f64 {
    let half = d as f64 / 2.0;
    if 2.0 * q + half >= 0.0 {
        return f64::INFINITY;
    }
    let omega = PI.powf(half) / gamma_half_dim_plus_one(d);
    let prefactor = d as f64 * omega / (2.0 * (2.0 * PI).powi(d as i32));
    let u = (2 * max_order + 1 + d) as f64;
    prefactor * tail_integral(half - 1.0, 2.0 * q, s, u)
}

/// `∫_U^∞ v^{e} (v − s)_+^{a} dv` for `e + a < −1`, `a >= −1/2`.
fn tail_integral(a: f64, e: f64, s: f64, u: f64) -> f64 {
    if s <= 0.5 * u {
        return binomial_series(a, e, s, u);
    }
    // v = s + w², dv = 2w dw removes the endpoint singularity at v = s
    let lo = u.max(s);
    let upper = 2.0 * s;
    let w_lo = (lo - s).sqrt();
    let w_hi = (upper - s).sqrt();
    let f = |w: f64| 2.0 * w.powf(2.0 * a + 1.0) * (s + w * w).powf(e);
    let panels = 2000;
    let h = (w_hi - w_lo) / panels as f64;
    let mut acc = f(w_lo) + f(w_hi);
    for i in 1..panels {
        let w = w_lo + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(w);
    }
    acc * h / 3.0 + binomial_series(a, e, s, upper)
}

/// `∫_V^∞ v^{e} (v − s)^{a} dv = Σ_j C(a, j) (−s)^j V^{e+a−j+1} / (j − e − a − 1)`,
/// convergent for `s / V <= 1/2`.
fn binomial_series(a: f64, e: f64, s: f64, v: f64) -> f64 {
    let mut coeff = 1.0;
    let mut power = v.powf(e + a + 1.0);
    let ratio = -s / v;
    let mut total = 0.0;
    for j in 0..400 {
        let jf = j as f64;
        let term = coeff * power / (jf - e - a - 1.0);
        total += term;
        if term.abs() <= 1e-17 * total.abs() || coeff == 0.0 {
            break;
        }
        coeff *= (a - jf) / (jf + 1.0);
        power *= ratio;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::{norm_p, sobolev_inner};

    /// `h_{2k}(0) = (−1)^k π^{−1/4} √((2k)!) / (2^k k!)`, via a stable product.
    fn h_even_at_zero(k: usize) -> f64 {
        let mut v = PI.powf(-0.25);
        for j in 1..=k {
            v *= -((2 * j - 1) as f64 / (2 * j) as f64).sqrt();
        }
        v
    }

    #[test]
    fn delta_at_origin_low_order() {
        let d = delta_expansion(&[0.0], shared_truncation(1, 1).unwrap()).unwrap();
        assert!((d.coeffs()[0] - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(d.coeffs()[1], 0.0);
    }

    #[test]
    fn delta_inner_product_matches_closed_form_sum() {
        let d = delta_expansion(&[0.0], shared_truncation(1, 64).unwrap()).unwrap();
        let got = sobolev_inner(&d, &d, -0.5).unwrap();
        let expected: f64 = (0..=32)
            .map(|k| {
                let h = h_even_at_zero(k);
                h * h / (4 * k + 1) as f64
            })
            .sum();
        assert!((got - expected).abs() / expected < 1e-13);
    }

    #[test]
    fn fast_norm_matches_materialized_norm() {
        for x in [0.0, 1.0, 2.0] {
            let delta = DeltaFamily::new(vec![x]).unwrap();
            let direct = {
                let mut s = 0.0;
                let mut hv = Vec::new();
                hermite_eval_all(400, x, &mut hv).unwrap();
                for (n, h) in hv.iter().enumerate() {
                    s += ((2 * n + 1) as f64).powf(-0.6) * h * h;
                }
                s.sqrt()
            };
            let est = delta.norm(-0.3, 400).unwrap();
            assert!((est.truncated - direct).abs() / direct < 1e-6);
            let mat = norm_p(&delta.materialize_order(400).unwrap(), -0.3);
            assert!((mat - direct).abs() / direct < 1e-12);
        }
        let delta2 = DeltaFamily::new(vec![0.3, -0.7]).unwrap();
        let w = SobolevWeights::new(2, 30, -1.0);
        let fast = delta2.squared_norm_truncated(&w).unwrap();
        let slow = norm_p(&delta2.materialize_order(30).unwrap(), -1.0).powi(2);
        assert!((fast - slow).abs() < 1e-13);
    }

    #[test]
    fn tail_corrected_norm_is_stable_in_truncation() {
        for x in [0.0, 3.0, 9.0] {
            let delta = DeltaFamily::new(vec![x]).unwrap();
            let a = delta.norm(-0.3, 200).unwrap().total();
            let b = delta.norm(-0.3, 800).unwrap().total();
            assert!((a - b).abs() / b < 2e-3, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn tail_in_two_dimensions_tracks_truncation_growth() {
        // the increase of the truncated sum from N to 4N should match the
        // difference of the two tail estimates
        let delta = DeltaFamily::new(vec![0.5, 0.0]).unwrap();
        let q = -0.8;
        let a = delta.norm(q, 20).unwrap();
        let b = delta.norm(q, 80).unwrap();
        let growth = b.truncated.powi(2) - a.truncated.powi(2);
        let predicted = a.tail - b.tail;
        assert!(
            (growth - predicted).abs() / growth < 0.05,
            "{growth} vs {predicted}"
        );
    }

    #[test]
    fn divergent_tail_is_infinite() {
        assert!(delta_tail(1, 0.0, -0.25, 10).is_infinite());
        assert!(delta_tail(2, 0.0, -0.4, 10).is_infinite());
        assert!(delta_tail(1, 0.0, -0.3, 10).is_finite());
    }

    #[test]
    fn translation_group_law_is_exact() {
        let d0 = DeltaFamily::origin(2).unwrap();
        let a = d0
            .translate(&[0.25, -1.5])
            .unwrap()
            .translate(&[0.5, 0.5])
            .unwrap();
        assert_eq!(a.location(), &[0.75, -1.0]);
        assert!(d0.translate(&[1.0]).is_err());
        assert!(DeltaFamily::new(vec![f64::NAN]).is_err());
    }
}
