use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::distribution_space::{
    norm_p, pair, shared_truncation, shifted_pairing, Distribution, HermiteExpansion, TestFunction,
};
use crate::error::{Error, Result};
use crate::hermite_basis::hermite_eval_all;

/// Order used when a closed-form coefficient must be paired with a
/// non-delta distribution.
pub const SMOOTH_PAIRING_ORDER: usize = 96;

/// Continuous linear functional on `S_{−p}` acting by duality.
#[derive(Debug, Clone)]
pub enum Functional {
    Zero,
    /// `y ↦ c ⟨y, 1⟩`. Exact on translates of deltas; not an element of `S_p`.
    Constant(f64),
    /// Pairing with a Hermite expansion in `S_p`.
    Expansion(Arc<HermiteExpansion>),
    /// Pairing with a closed-form test function.
    Smooth(Arc<SmoothCoefficient>),
}

#[derive(Debug)]
pub struct SmoothCoefficient {
    function: TestFunction,
    expansion: OnceLock<HermiteExpansion>,
}

impl SmoothCoefficient {
    pub fn function(&self) -> &TestFunction {
        &self.function
    }

    fn expansion(&self) -> Result<&HermiteExpansion> {
        if let Some(e) = self.expansion.get() {
            return Ok(e);
        }
        let e = self.function.expansion(SMOOTH_PAIRING_ORDER)?;
        Ok(self.expansion.get_or_init(|| e))
    }
}

impl Functional {
    pub fn smooth(f: TestFunction) -> Self {
        Self::Smooth(Arc::new(SmoothCoefficient {
            function: f,
            expansion: OnceLock::new(),
        }))
    }

    pub fn expansion(u: HermiteExpansion) -> Self {
        Self::Expansion(Arc::new(u))
    }

    /// Parses `constant c`, `zero`, or a test-function description
    /// (`hermite n`, `gaussian center [width] [amplitude]`).
    pub fn parse(text: &str, dimension: usize) -> Result<Self> {
        let mut parts = text.split_whitespace();
        match parts.next() {
            Some("zero") if parts.next().is_none() => Ok(Self::Zero),
            Some("constant") => {
                let v = parts.next().ok_or_else(|| {
                    Error::InvalidArgument(format!("`{text}`: constant needs a value"))
                })?;
                let c: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("`{text}`: bad constant")))?;
                if parts.next().is_some() || !c.is_finite() {
                    return Err(Error::InvalidArgument(format!("`{text}`: bad constant")));
                }
                Ok(if c == 0.0 {
                    Self::Zero
                } else {
                    Self::Constant(c)
                })
            }
            _ => Ok(Self::smooth(TestFunction::parse(text, dimension)?)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// `‖σ‖_p`, infinite for the constant mode.
    pub fn norm(&self, p: f64) -> Result<f64> {
        Ok(match self {
            Self::Zero => 0.0,
            Self::Constant(_) => f64::INFINITY,
            Self::Expansion(e) => norm_p(e, p),
            Self::Smooth(s) => norm_p(s.expansion()?, p),
        })
    }

    /// `⟨y, σ⟩`.
    pub fn apply(&self, y: &Distribution) -> Result<f64> {
        match (self, y) {
            (Self::Zero, _) => Ok(0.0),
            (Self::Constant(c), Distribution::Delta(_)) => Ok(*c),
            (Self::Constant(c), Distribution::Expansion(u)) => Ok(c * integral(u)?),
            (Self::Constant(c), Distribution::Translated { base, .. }) => Ok(c * integral(base)?),
            (Self::Expansion(e), Distribution::Delta(d)) => e.evaluate(d.location()),
            (Self::Expansion(e), Distribution::Expansion(u)) => pair(u, e),
            (Self::Expansion(e), Distribution::Translated { base, shift }) => {
                shifted_pairing(base, e, shift)
            }
            (Self::Smooth(s), Distribution::Delta(d)) => s.function.value(d.location()),
            (Self::Smooth(s), Distribution::Expansion(u)) => pair(u, s.expansion()?),
            (Self::Smooth(s), Distribution::Translated { base, shift }) => {
                shifted_pairing(base, s.expansion()?, shift)
            }
        }
    }

    /// `⟨δ_x, σ⟩` on the hot path; non-finite locations give NaN.
    pub fn at_point(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Expansion(e) => e.evaluate(x).unwrap_or(f64::NAN),
            Self::Smooth(s) => s.function.value(x).unwrap_or(f64::NAN),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match self {
            Self::Zero => Self::Zero,
            Self::Constant(c) => Self::Constant(c * factor),
            Self::Expansion(e) => Self::expansion(e.scaled(factor)),
            Self::Smooth(s) => {
                let f = &s.function;
                Self::smooth(TestFunction::new(
                    f.factors().to_vec(),
                    f.amplitude() * factor,
                )?)
            }
        })
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Constant(c) => write!(f, "constant {c}"),
            Self::Expansion(e) => write!(f, "expansion(d={},N={})", e.dimension(), e.max_order()),
            Self::Smooth(s) => write!(f, "{}", s.function),
        }
    }
}

/// `∫ h_k dx` for `k <= max_order`: `√2 π^{1/4} √((2j)!)/(2^j j!)` at
/// `k = 2j`, zero at odd `k`.
pub fn hermite_integrals(max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    let mut v = 2f64.sqrt() * PI.powf(0.25);
    for k in (0..=max_order).step_by(2) {
        out[k] = v;
        let j = (k / 2 + 1) as f64;
        v *= ((2.0 * j - 1.0) / (2.0 * j)).sqrt();
    }
    out
}

/// `∫ u dx` for a truncated expansion.
pub fn integral(u: &HermiteExpansion) -> Result<f64> {
    let ints = hermite_integrals(u.max_order());
    let mut acc = 0.0;
    for (entries, c) in u.truncation().iter().zip(u.coeffs()) {
        if *c == 0.0 {
            continue;
        }
        let w: f64 = entries.iter().map(|&e| ints[e as usize]).product();
        acc += c * w;
    }
    Ok(acc)
}

/// Least-squares Hermite fit of the constant `value` on `[−a, a]^d`, built as
/// a tensor product of one-dimensional even fits.
pub fn constant_surrogate(
    dimension: usize,
    value: f64,
    half_width: f64,
    max_order: usize,
) -> Result<HermiteExpansion> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "surrogate window must be positive, got {half_width}"
        )));
    }
    let even: Vec<usize> = (0..=max_order).step_by(2).collect();
    let samples = 8 * max_order.max(16);
    let mut a = DMatrix::zeros(samples, even.len());
    let mut hv = Vec::new();
    for i in 0..samples {
        let x = half_width * i as f64 / (samples - 1) as f64;
        hermite_eval_all(max_order, x, &mut hv)?;
        for (j, &k) in even.iter().enumerate() {
            a[(i, j)] = hv[k];
        }
    }
    let b = DVector::from_element(samples, 1.0);
    let fit = a
        .svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut one_d = vec![0.0; max_order + 1];
    for (j, &k) in even.iter().enumerate() {
        one_d[k] = fit[j];
    }
    let t = shared_truncation(dimension, max_order)?;
    let coeffs = t
        .iter()
        .map(|entries| value * entries.iter().map(|&e| one_d[e as usize]).product::<f64>())
        .collect();
    HermiteExpansion::new(t, coeffs, 0.0)
}
