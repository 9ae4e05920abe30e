use crate::distribution_space::{
    derivative, second_derivative, Distribution, HermiteExpansion, Truncated,
};
use crate::error::{Error, Result};

use super::functional::Functional;

/// Coefficients `σ_ij, b_i ∈ S_p` together with the base profile `φ ∈ S_{−p}`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    dimension: usize,
    regularity: f64,
    sigma: Vec<Functional>,
    b: Vec<Functional>,
    base: Distribution,
}

impl CoefficientField {
    /// `sigma` is row-major `d × d`.
    pub fn new(
        dimension: usize,
        regularity: f64,
        sigma: Vec<Functional>,
        b: Vec<Functional>,
        base: Distribution,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        if sigma.len() != dimension * dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension * dimension,
                found: sigma.len(),
            });
        }
        if b.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: b.len(),
            });
        }
        if base.dimension() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: base.dimension(),
            });
        }
        if !(regularity >= 0.0 && regularity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularity must be a finite non-negative number, got {regularity}"
            )));
        }
        Ok(Self {
            dimension,
            regularity,
            sigma,
            b,
            base,
        })
    }

    /// Constant-mode field `σ_ij(y) = S_ij ⟨y,1⟩`, `b_i(y) = β_i ⟨y,1⟩`.
    pub fn constant(
        dimension: usize,
        regularity: f64,
        sigma: &[f64],
        b: &[f64],
        base: Distribution,
    ) -> Result<Self> {
        let wrap = |c: f64| {
            if c == 0.0 {
                Functional::Zero
            } else {
                Functional::Constant(c)
            }
        };
        Self::new(
            dimension,
            regularity,
            sigma.iter().copied().map(wrap).collect(),
            b.iter().copied().map(wrap).collect(),
            base,
        )
    }

    /// Identity diffusion, no drift, started from `δ_0`.
    pub fn brownian(dimension: usize, regularity: f64) -> Result<Self> {
        let mut sigma = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            sigma[i * dimension + i] = 1.0;
        }
        Self::constant(
            dimension,
            regularity,
            &sigma,
            &vec![0.0; dimension],
            Distribution::delta(vec![0.0; dimension])?,
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn sigma(&self, i: usize, j: usize) -> &Functional {
        &self.sigma[i * self.dimension + j]
    }

    pub fn sigma_entries(&self) -> &[Functional] {
        &self.sigma
    }

    pub fn b(&self, i: usize) -> &Functional {
        &self.b[i]
    }

    pub fn b_entries(&self) -> &[Functional] {
        &self.b
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn with_sigma(mut self, sigma: Vec<Functional>) -> Result<Self> {
        if sigma.len() != self.dimension * self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension * self.dimension,
                found: sigma.len(),
            });
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_b(mut self, b: Vec<Functional>) -> Result<Self> {
        if b.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: b.len(),
            });
        }
        self.b = b;
        Ok(self)
    }

    /// `‖σ_ij‖_p` and `‖b_i‖_p`, the membership witness for the coefficients.
    pub fn coefficient_norms(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.regularity;
        Ok((
            self.sigma
                .iter()
                .map(|f| f.norm(p))
                .collect::<Result<_>>()?,
            self.b.iter().map(|f| f.norm(p)).collect::<Result<_>>()?,
        ))
    }

    fn check(&self, y: &Distribution) -> Result<()> {
        if y.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: y.dimension(),
            });
        }
        Ok(())
    }

    /// Row-major `σ(y)`.
    pub fn sigma_eval(&self, y: &Distribution) -> Result<Vec<f64>> {
        self.check(y)?;
        self.sigma.iter().map(|f| f.apply(y)).collect()
    }

    pub fn b_eval(&self, y: &Distribution) -> Result<Vec<f64>> {
        self.check(y)?;
        self.b.iter().map(|f| f.apply(y)).collect()
    }
}

/// `Σ_ij c_ij ∂²_ij + Σ_i c_i ∂_i` with scalar coefficients frozen at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialForm {
    dimension: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl DifferentialForm {
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            first: vec![0.0; dimension],
            second: vec![0.0; dimension * dimension],
        }
    }

    pub fn new(dimension: usize, first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != dimension || second.len() != dimension * dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: first.len(),
            });
        }
        Ok(Self {
            dimension,
            first,
            second,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    /// Row-major second-order coefficients.
    pub fn second(&self) -> &[f64] {
        &self.second
    }

    /// `⟨F(X), ψ⟩` from the pairings `g_i = ⟨∂_i X, ψ⟩`, `H_ij = ⟨∂²_ij X, ψ⟩`.
    pub fn pair_jet(&self, gradient_pairing: &[f64], hessian_pairing: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, g) in self.first.iter().zip(gradient_pairing) {
            acc += c * g;
        }
        for (c, h) in self.second.iter().zip(hessian_pairing) {
            acc += c * h;
        }
        acc
    }

    /// `F(y)` on the truncation of `y`.
    pub fn apply(&self, y: &HermiteExpansion) -> Result<Truncated<HermiteExpansion>> {
        let d = self.dimension;
        if y.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: y.dimension(),
            });
        }
        let mut out = HermiteExpansion::zeros(y.truncation().clone(), y.regularity() - 1.0);
        let mut dropped2 = 0.0;
        for i in 0..d {
            if self.first[i] != 0.0 {
                let di = derivative(y, i)?;
                dropped2 += (self.first[i] * di.dropped_l2).powi(2);
                out = out.add_scaled(&di.value, self.first[i])?;
            }
        }
        for i in 0..d {
            for j in 0..d {
                let c = self.second[i * d + j];
                if c != 0.0 {
                    let dij = second_derivative(y, i, j)?;
                    dropped2 += (c * dij.dropped_l2).powi(2);
                    out = out.add_scaled(&dij.value, c)?;
                }
            }
        }
        Ok(Truncated {
            value: out.with_regularity(y.regularity() - 1.0),
            dropped_l2: dropped2.sqrt(),
        })
    }
}

/// Coefficients of `L(y) = ½ Σ_ij (σσᵗ)_ij(y) ∂²_ij y − Σ_i b_i(y) ∂_i y`.
pub fn form_l(field: &CoefficientField, y: &Distribution) -> Result<DifferentialForm> {
    let d = field.dimension();
    let s = field.sigma_eval(y)?;
    let b = field.b_eval(y)?;
    let mut second = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += s[i * d + k] * s[j * d + k];
            }
            second[i * d + j] = 0.5 * acc;
        }
    }
    DifferentialForm::new(d, b.iter().map(|v| -v).collect(), second)
}

/// Coefficients of `A_j(y) = −Σ_i σ_ij(y) ∂_i y`.
pub fn form_a(field: &CoefficientField, y: &Distribution, j: usize) -> Result<DifferentialForm> {
    let d = field.dimension();
    if j >= d {
        return Err(Error::AxisOutOfRange {
            axis: j,
            dimension: d,
        });
    }
    field.check(y)?;
    let first = (0..d)
        .map(|i| field.sigma(i, j).apply(y).map(|v| -v))
        .collect::<Result<_>>()?;
    DifferentialForm::new(d, first, vec![0.0; d * d])
}

/// Coefficients of `L̂(y) = −Σ_j h_j A_j(y) = Σ_ij h_j σ_ij(y) ∂_i y`.
pub fn form_l_hat(
    field: &CoefficientField,
    y: &Distribution,
    h: &[f64],
) -> Result<DifferentialForm> {
    let d = field.dimension();
    if h.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.len(),
        });
    }
    let mut first = vec![0.0; d];
    for (j, hj) in h.iter().enumerate() {
        let a = form_a(field, y, j)?;
        for (f, c) in first.iter_mut().zip(a.first()) {
            *f += hj * c;
        }
    }
    for f in first.iter_mut() {
        *f = -*f;
    }
    DifferentialForm::new(d, first, vec![0.0; d * d])
}

/// Materializes `y` so that second derivatives are exact up to `max_order`.
fn materialize_for_derivatives(
    field: &CoefficientField,
    y: &Distribution,
    max_order: usize,
) -> Result<(HermiteExpansion, f64)> {
    match y {
        Distribution::Delta(_) => {
            let wide = y.materialize(max_order + 2)?;
            Ok((wide.value.with_regularity(-field.regularity()), 0.0))
        }
        _ => {
            let m = y.materialize(max_order)?;
            Ok((m.value, m.dropped_l2))
        }
    }
}

fn finish(
    form: &DifferentialForm,
    field: &CoefficientField,
    y: &Distribution,
    max_order: usize,
) -> Result<Truncated<HermiteExpansion>> {
    let (u, dropped_in) = materialize_for_derivatives(field, y, max_order)?;
    let out = form.apply(&u)?;
    let exact_delta = matches!(y, Distribution::Delta(_));
    Ok(Truncated {
        value: out.value.resized(max_order)?,
        dropped_l2: if exact_delta {
            0.0
        } else {
            out.dropped_l2.hypot(dropped_in)
        },
    })
}

/// `L(y)` as an expansion of order `max_order`.
pub fn apply_l(
    field: &CoefficientField,
    y: &Distribution,
    max_order: usize,
) -> Result<Truncated<HermiteExpansion>> {
    finish(&form_l(field, y)?, field, y, max_order)
}

/// `A_j(y)` as an expansion of order `max_order`.
pub fn apply_a(
    field: &CoefficientField,
    y: &Distribution,
    j: usize,
    max_order: usize,
) -> Result<Truncated<HermiteExpansion>> {
    finish(&form_a(field, y, j)?, field, y, max_order)
}

/// `L̂(y) = −Σ_j h_j A_j(y)`, accumulated over `j` in the same order as
/// [`combine_a`] so that `L̂ + Σ_j h_j A_j` vanishes identically.
pub fn apply_l_hat(
    field: &CoefficientField,
    y: &Distribution,
    h: &[f64],
    max_order: usize,
) -> Result<Truncated<HermiteExpansion>> {
    let sum = combine_a(field, y, h, max_order)?;
    Ok(Truncated {
        value: sum.value.scaled(-1.0),
        dropped_l2: sum.dropped_l2,
    })
}

/// `Σ_j h_j A_j(y)`.
pub fn combine_a(
    field: &CoefficientField,
    y: &Distribution,
    h: &[f64],
    max_order: usize,
) -> Result<Truncated<HermiteExpansion>> {
    let d = field.dimension();
    if h.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.len(),
        });
    }
    let mut acc: Option<HermiteExpansion> = None;
    let mut dropped2 = 0.0;
    for (j, hj) in h.iter().enumerate() {
        let a = apply_a(field, y, j, max_order)?;
        dropped2 += (hj * a.dropped_l2).powi(2);
        acc = Some(match acc {
            None => a.value.scaled(*hj),
            Some(s) => s.add_scaled(&a.value, *hj)?,
        });
    }
    Ok(Truncated {
        value: acc.expect("dimension is positive"),
        dropped_l2: dropped2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::{ground_state, pair, TestFunction};
    use crate::spde_operators::constant_surrogate;

    fn surrogate_field() -> CoefficientField {
        let s = constant_surrogate(1, 1.0, 6.0, 120).unwrap();
        CoefficientField::new(
            1,
            0.3,
            vec![Functional::expansion(s)],
            vec![Functional::Zero],
            Distribution::delta(vec![0.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sigma_eval_examples() {
        let f = CoefficientField::new(
            1,
            0.3,
            vec![Functional::expansion(ground_state(1, 0).unwrap())],
            vec![Functional::parse("hermite 1", 1).unwrap()],
            Distribution::delta(vec![0.0]).unwrap(),
        )
        .unwrap();
        let x = 0.6;
        let y = Distribution::delta(vec![x]).unwrap();
        let h = crate::hermite_basis::hermite_values(1, x).unwrap();
        assert!((f.sigma_eval(&y).unwrap()[0] - h[0]).abs() < 1e-15);
        assert!((f.b_eval(&y).unwrap()[0] - h[1]).abs() < 1e-15);
        let zero = Distribution::expansion(HermiteExpansion::zeros(
            crate::distribution_space::shared_truncation(1, 5).unwrap(),
            -0.3,
        ));
        assert_eq!(f.sigma_eval(&zero).unwrap(), vec![0.0]);
        let yy = Distribution::expansion(ground_state(1, 6).unwrap());
        let scaled = Distribution::expansion(ground_state(1, 6).unwrap().scaled(2.5));
        assert!((f.b_eval(&scaled).unwrap()[0] - 2.5 * f.b_eval(&yy).unwrap()[0]).abs() < 1e-15);
        assert!(f
            .sigma_eval(&Distribution::delta(vec![0.0, 0.0]).unwrap())
            .is_err());
    }

    #[test]
    fn surrogate_identity_is_close_to_one() {
        let f = surrogate_field();
        for i in -8..=8 {
            let x = i as f64 * 0.5;
            let s = f
                .sigma_eval(&Distribution::delta(vec![x]).unwrap())
                .unwrap();
            assert!((s[0] - 1.0).abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn l_and_a_on_deltas_pair_to_derivatives() {
        let f = surrogate_field();
        let psi = TestFunction::gaussian(1, 0.2).unwrap();
        let psi_n = psi.expansion(100).unwrap();
        for x in [-1.0, 0.0, 0.9] {
            let y = Distribution::delta(vec![x]).unwrap();
            let jet = psi.jet(&[x]).unwrap();
            let l = apply_l(&f, &y, 100).unwrap();
            assert!((pair(&l.value, &psi_n).unwrap() - 0.5 * jet.hessian[0]).abs() < 1e-3);
            assert_eq!(l.value.regularity(), -1.3);
            let a = apply_a(&f, &y, 0, 100).unwrap();
            assert!((pair(&a.value, &psi_n).unwrap() - jet.gradient[0]).abs() < 1e-3);
        }
    }

    #[test]
    fn structure_of_l_and_a() {
        let base = surrogate_field();
        let y = Distribution::delta(vec![0.4]).unwrap();
        // A ignores b
        let perturbed = base
            .clone()
            .with_b(vec![Functional::parse("gaussian 0 1 7", 1).unwrap()])
            .unwrap();
        let a0 = apply_a(&base, &y, 0, 40).unwrap().value;
        let a1 = apply_a(&perturbed, &y, 0, 40).unwrap().value;
        assert_eq!(a0.coeffs(), a1.coeffs());
        // with σ ≡ 0, L depends on b only
        let no_sigma = perturbed
            .clone()
            .with_sigma(vec![Functional::Zero])
            .unwrap();
        let other_sigma_zero = no_sigma.clone();
        let l = apply_l(&no_sigma, &y, 40).unwrap().value;
        assert_eq!(
            l.coeffs(),
            apply_l(&other_sigma_zero, &y, 40).unwrap().value.coeffs()
        );
        let form = form_l(&no_sigma, &y).unwrap();
        assert!(form.second().iter().all(|c| *c == 0.0));
        // σ scaled by c scales A by c
        let scaled = base
            .clone()
            .with_sigma(vec![base.sigma(0, 0).scaled(3.0).unwrap()])
            .unwrap();
        let a3 = apply_a(&scaled, &y, 0, 40).unwrap().value;
        for (u, v) in a3.coeffs().iter().zip(a0.coeffs()) {
            assert!((u - 3.0 * v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        // y = 0 gives 0
        let zero = Distribution::expansion(HermiteExpansion::zeros(
            crate::distribution_space::shared_truncation(1, 10).unwrap(),
            -0.3,
        ));
        assert!(apply_l(&base, &zero, 10)
            .unwrap()
            .value
            .coeffs()
            .iter()
            .all(|c| *c == 0.0));
    }

    #[test]
    fn girsanov_drift_identity_is_exact() {
        let d = 2;
        let mut sigma = Vec::new();
        for k in 0..4 {
            sigma.push(
                Functional::parse(
                    &format!(
                        "gaussian {},{} 1.2 {}",
                        0.1 * k as f64,
                        -0.2,
                        1.0 + k as f64
                    ),
                    d,
                )
                .unwrap(),
            );
        }
        let f = CoefficientField::new(
            d,
            0.6,
            sigma,
            vec![Functional::Zero, Functional::Zero],
            Distribution::delta(vec![0.0, 0.0]).unwrap(),
        )
        .unwrap();
        let y = Distribution::delta(vec![0.3, -0.5]).unwrap();
        let h = [0.7, -1.3];
        let lh = apply_l_hat(&f, &y, &h, 20).unwrap().value;
        let sum = combine_a(&f, &y, &h, 20).unwrap().value;
        let total = lh.add_scaled(&sum, 1.0).unwrap();
        assert!(total.coeffs().iter().all(|c| *c == 0.0));
        // h = 0 gives zero; additivity in h
        let z = apply_l_hat(&f, &y, &[0.0, 0.0], 20).unwrap().value;
        assert!(z.coeffs().iter().all(|c| *c == 0.0));
        let a = apply_l_hat(&f, &y, &[0.7, 0.0], 20).unwrap().value;
        let b = apply_l_hat(&f, &y, &[0.0, -1.3], 20).unwrap().value;
        let ab = a.add_scaled(&b, 1.0).unwrap();
        for (u, v) in ab.coeffs().iter().zip(lh.coeffs()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn l_hat_on_delta_is_h_times_derivative() {
        let f = surrogate_field();
        let y = Distribution::delta(vec![0.25]).unwrap();
        let h = 0.8;
        let lh = apply_l_hat(&f, &y, &[h], 30).unwrap().value;
        let a = apply_a(&f, &y, 0, 30).unwrap().value;
        for (u, v) in lh.coeffs().iter().zip(a.coeffs()) {
            assert_eq!(*u, -(h * v));
        }
    }
}
