use crate::distribution_space::Distribution;
use crate::error::{Error, Result};

use super::field::CoefficientField;

/// Coefficients of `dZ = b̄(Z) dt + σ̄(Z) dB` evaluated pointwise.
///
/// Evaluation is infallible; a non-finite state yields non-finite output,
/// which the path engine flags.
pub trait SdeCoefficients: Send + Sync {
    fn dimension(&self) -> usize;
    /// Row-major `d × d` diffusion matrix.
    fn sigma(&self, z: &[f64], out: &mut [f64]);
    fn drift(&self, z: &[f64], out: &mut [f64]);
}

/// `σ̄_ij(ρ) = σ_ij(τ_ρ φ)`, `b̄_i(ρ) = b_i(τ_ρ φ)`.
#[derive(Debug, Clone, Copy)]
pub struct Pullback<'a> {
    field: &'a CoefficientField,
}

pub fn pullback_coeffs(field: &CoefficientField) -> Pullback<'_> {
    Pullback { field }
}

impl Pullback<'_> {
    pub fn field(&self) -> &CoefficientField {
        self.field
    }

    fn fill(&self, entries: &[super::Functional], rho: &[f64], out: &mut [f64]) {
        match self.field.base() {
            Distribution::Delta(d) => {
                let x: Vec<f64> = d.location().iter().zip(rho).map(|(a, b)| a + b).collect();
                for (o, f) in out.iter_mut().zip(entries) {
                    *o = f.at_point(&x);
                }
            }
            base => match base.translate(rho) {
                Ok(moved) => {
                    for (o, f) in out.iter_mut().zip(entries) {
                        *o = f.apply(&moved).unwrap_or(f64::NAN);
                    }
                }
                Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
            },
        }
    }

    pub fn sigma_at(&self, rho: &[f64]) -> Result<Vec<f64>> {
        self.field.sigma_eval(&self.field.base().translate(rho)?)
    }

    pub fn drift_at(&self, rho: &[f64]) -> Result<Vec<f64>> {
        self.field.b_eval(&self.field.base().translate(rho)?)
    }
}

impl SdeCoefficients for Pullback<'_> {
    fn dimension(&self) -> usize {
        self.field.dimension()
    }

    fn sigma(&self, z: &[f64], out: &mut [f64]) {
        self.fill(self.field.sigma_entries(), z, out);
    }

    fn drift(&self, z: &[f64], out: &mut [f64]) {
        self.fill(self.field.b_entries(), z, out);
    }
}

/// Coefficients given directly as closures.
pub struct FnCoefficients<S, B> {
    dimension: usize,
    sigma: S,
    drift: B,
}

impl<S, B> FnCoefficients<S, B>
where
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
    B: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dimension: usize, sigma: S, drift: B) -> Self {
        Self {
            dimension,
            sigma,
            drift,
        }
    }
}

impl<S, B> SdeCoefficients for FnCoefficients<S, B>
where
    S: Fn(&[f64], &mut [f64]) + Send + Sync,
    B: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn sigma(&self, z: &[f64], out: &mut [f64]) {
        (self.sigma)(z, out)
    }

    fn drift(&self, z: &[f64], out: &mut [f64]) {
        (self.drift)(z, out)
    }
}

/// Largest difference quotient of `σ̄` and `b̄` between neighbouring points
/// of a regular grid on `[c − r, c + r]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub sigma: f64,
    pub drift: f64,
}

pub fn local_lipschitz(
    coeffs: &dyn SdeCoefficients,
    center: &[f64],
    radius: f64,
    points_per_axis: usize,
) -> Result<LipschitzEstimate> {
    let d = coeffs.dimension();
    if center.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: center.len(),
        });
    }
    if points_per_axis < 2 || !(radius > 0.0) {
        return Err(Error::InvalidArgument(
            "Lipschitz grid needs at least two points and a positive radius".into(),
        ));
    }
    let step = 2.0 * radius / (points_per_axis - 1) as f64;
    let total = points_per_axis
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument("Lipschitz grid too large".into()))?;
    let mut est = LipschitzEstimate {
        sigma: 0.0,
        drift: 0.0,
    };
    let (mut s0, mut s1) = (vec![0.0; d * d], vec![0.0; d * d]);
    let (mut b0, mut b1) = (vec![0.0; d], vec![0.0; d]);
    let mut z = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for (axis, zi) in z.iter_mut().enumerate() {
            *zi = center[axis] - radius + (rem % points_per_axis) as f64 * step;
            rem /= points_per_axis;
        }
        coeffs.sigma(&z, &mut s0);
        coeffs.drift(&z, &mut b0);
        for axis in 0..d {
            let mut w = z.clone();
            w[axis] += step;
            if w[axis] > center[axis] + radius + 1e-12 {
                continue;
            }
            coeffs.sigma(&w, &mut s1);
            coeffs.drift(&w, &mut b1);
            let ds = s0
                .iter()
                .zip(&s1)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let db = b0
                .iter()
                .zip(&b1)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            est.sigma = est.sigma.max(ds / step);
            est.drift = est.drift.max(db / step);
        }
    }
    Ok(est)
}
