use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::hermite_basis::{
    gauss_hermite, hermite_eval_all, quadrature_order_for, BasisTruncation,
};
use crate::stats::CompensatedSum;

/// Shared, cached graded truncation.
pub fn shared_truncation(dimension: usize, max_order: usize) -> Result<Arc<BasisTruncation>> {
    type Cache = Mutex<HashMap<(usize, usize), Arc<BasisTruncation>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache
        .lock()
        .expect("truncation cache poisoned")
        .get(&(dimension, max_order))
    {
        return Ok(Arc::clone(t));
    }
    let t = Arc::new(BasisTruncation::new(dimension, max_order)?);
    cache
        .lock()
        .expect("truncation cache poisoned")
        .insert((dimension, max_order), Arc::clone(&t));
    Ok(t)
}

/// A distribution represented by its Hermite coefficients `⟨u, h_n⟩` over a
/// graded truncation, tagged with the Sobolev index it is meant to inhabit.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    truncation: Arc<BasisTruncation>,
    coeffs: Vec<f64>,
    regularity: f64,
}

/// Result of an operation that loses coefficients at the truncation boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated<T> {
    pub value: T,
    /// ℓ² mass of the coefficients that fell outside the truncation.
    pub dropped_l2: f64,
}

impl HermiteExpansion {
    pub fn new(
        truncation: Arc<BasisTruncation>,
        coeffs: Vec<f64>,
        regularity: f64,
    ) -> Result<Self> {
        if coeffs.len() != truncation.size() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                truncation.size(),
                coeffs.len()
            )));
        }
        Ok(Self {
            truncation,
            coeffs,
            regularity,
        })
    }

    pub fn zeros(truncation: Arc<BasisTruncation>, regularity: f64) -> Self {
        let coeffs = vec![0.0; truncation.size()];
        Self {
            truncation,
            coeffs,
            regularity,
        }
    }

    /// The Hermite function `h_n` itself.
    pub fn basis_element(truncation: Arc<BasisTruncation>, n: &[u32]) -> Result<Self> {
        let off = truncation
            .offset(n)
            .ok_or_else(|| Error::InvalidArgument(format!("index {n:?} outside the truncation")))?;
        let mut u = Self::zeros(truncation, 0.0);
        u.coeffs[off] = 1.0;
        Ok(u)
    }

    pub fn truncation(&self) -> &Arc<BasisTruncation> {
        &self.truncation
    }

    pub fn dimension(&self) -> usize {
        self.truncation.dimension()
    }

    pub fn max_order(&self) -> usize {
        self.truncation.max_order()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn with_regularity(mut self, regularity: f64) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            truncation: Arc::clone(&self.truncation),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            regularity: self.regularity,
        }
    }

    /// `self + factor * other`, on the larger of the two truncations.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Result<Self> {
        check_dims(self, other)?;
        let (big, small, small_factor, big_factor) = if self.max_order() >= other.max_order() {
            (self, other, factor, 1.0)
        } else {
            (other, self, 1.0, factor)
        };
        let mut coeffs: Vec<f64> = big.coeffs.iter().map(|c| c * big_factor).collect();
        for (c, s) in coeffs.iter_mut().zip(&small.coeffs) {
            *c += small_factor * s;
        }
        Ok(Self {
            truncation: Arc::clone(&big.truncation),
            coeffs,
            regularity: self.regularity.min(other.regularity),
        })
    }

    /// Restriction (or zero padding) to `max_order`.
    pub fn resized(&self, max_order: usize) -> Result<Self> {
        let t = shared_truncation(self.dimension(), max_order)?;
        let mut coeffs = vec![0.0; t.size()];
        let n = coeffs.len().min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Ok(Self {
            truncation: t,
            coeffs,
            regularity: self.regularity,
        })
    }

    /// Pointwise value `Σ_n ⟨u, h_n⟩ h_n(x)` of the truncated expansion.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        let tables = axis_tables(self.max_order(), x)?;
        Ok(self.evaluate_with_tables(&tables))
    }

    pub(crate) fn evaluate_with_tables(&self, tables: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (entries, c) in self.truncation.iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let mut term = *c;
            for (axis, &e) in entries.iter().enumerate() {
                term *= tables[axis][e as usize];
            }
            acc += term;
        }
        acc
    }
}

pub(crate) fn axis_tables(max_order: usize, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    x.iter()
        .map(|&xi| {
            let mut v = Vec::new();
            hermite_eval_all(max_order, xi, &mut v)?;
            Ok(v)
        })
        .collect()
}

fn check_dims(f: &HermiteExpansion, g: &HermiteExpansion) -> Result<()> {
    if f.dimension() != g.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: g.dimension(),
        });
    }
    Ok(())
}

/// `(2k + d)^{2p}` for every order `k <= max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevWeights {
    dimension: usize,
    regularity: f64,
    by_order: Vec<f64>,
}

impl SobolevWeights {
    pub fn new(dimension: usize, max_order: usize, regularity: f64) -> Self {
        let by_order = (0..=max_order)
            .map(|k| ((2 * k + dimension) as f64).powf(2.0 * regularity))
            .collect();
        Self {
            dimension,
            regularity,
            by_order,
        }
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_order(&self) -> usize {
        self.by_order.len() - 1
    }

    pub fn by_order(&self) -> &[f64] {
        &self.by_order
    }
}

/// `⟨f, g⟩_p = Σ_n (2|n| + d)^{2p} ⟨f, h_n⟩⟨g, h_n⟩` over the union of the
/// retained indices (missing coefficients count as zero).
pub fn sobolev_inner(f: &HermiteExpansion, g: &HermiteExpansion, p: f64) -> Result<f64> {
    check_dims(f, g)?;
    let common = f.coeffs.len().min(g.coeffs.len());
    let t = if f.coeffs.len() <= g.coeffs.len() {
        &f.truncation
    } else {
        &g.truncation
    };
    let weights = SobolevWeights::new(f.dimension(), t.max_order(), p);
    let orders = t.orders();
    let mut acc = CompensatedSum::new();
    for i in 0..common {
        acc.add(weights.by_order[orders[i] as usize] * f.coeffs[i] * g.coeffs[i]);
    }
    Ok(acc.value())
}

/// `‖u‖_p`.
pub fn norm_p(u: &HermiteExpansion, p: f64) -> f64 {
    squared_norm_p(u, p).sqrt()
}

pub fn squared_norm_p(u: &HermiteExpansion, p: f64) -> f64 {
    let weights = SobolevWeights::new(u.dimension(), u.max_order(), p);
    let orders = u.truncation.orders();
    let mut acc = CompensatedSum::new();
    for (c, k) in u.coeffs.iter().zip(orders) {
        acc.add(weights.by_order[*k as usize] * c * c);
    }
    acc.value()
}

/// The `L²` bilinear form `Σ_n ⟨u, h_n⟩⟨ψ, h_n⟩`, i.e. the duality pairing.
pub fn pair(u: &HermiteExpansion, psi: &HermiteExpansion) -> Result<f64> {
    check_dims(u, psi)?;
    let mut acc = CompensatedSum::new();
    for (a, b) in u.coeffs.iter().zip(&psi.coeffs) {
        acc.add(a * b);
    }
    Ok(acc.value())
}

/// `∂_axis u` (axis is zero-based). The output keeps the input truncation;
/// the mass pushed above `max_order` is reported in `dropped_l2`.
pub fn derivative(u: &HermiteExpansion, axis: usize) -> Result<Truncated<HermiteExpansion>> {
    let d = u.dimension();
    if axis >= d {
        return Err(Error::AxisOutOfRange { axis, dimension: d });
    }
    let t = &u.truncation;
    let n_max = t.max_order() as u32;
    let mut out = vec![0.0; t.size()];
    let mut scratch = vec![0u32; d];
    let mut dropped = 0.0;
    for (off, entries) in t.iter().enumerate() {
        let ni = entries[axis] as f64;
        scratch.copy_from_slice(entries);
        let mut value = 0.0;
        if t.order(off) < n_max {
            scratch[axis] += 1;
            let up = t.offset(&scratch).expect("raised index inside truncation");
            value += ((ni + 1.0) / 2.0).sqrt() * u.coeffs[up];
            scratch[axis] -= 1;
        } else {
            let c = u.coeffs[off];
            dropped += (ni + 1.0) / 2.0 * c * c;
        }
        if entries[axis] > 0 {
            scratch[axis] -= 1;
            let down = t.offset(&scratch).expect("lowered index inside truncation");
            value -= (ni / 2.0).sqrt() * u.coeffs[down];
        }
        out[off] = value;
    }
    Ok(Truncated {
        value: HermiteExpansion {
            truncation: Arc::clone(t),
            coeffs: out,
            regularity: u.regularity - 0.5,
        },
        dropped_l2: dropped.sqrt(),
    })
}

/// `∂²_{ij} u` as two successive first derivatives.
pub fn second_derivative(
    u: &HermiteExpansion,
    i: usize,
    j: usize,
) -> Result<Truncated<HermiteExpansion>> {
    let first = derivative(u, j)?;
    let second = derivative(&first.value, i)?;
    Ok(Truncated {
        dropped_l2: first.dropped_l2.hypot(second.dropped_l2),
        value: second.value,
    })
}

/// One-dimensional translation matrix `T[m][n] = ∫ h_n(y − x) h_m(y) dy`
/// for `m, n <= max_order`, row-major.
pub fn translation_matrix(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::NonFinite("translation"));
    }
    let size = max_order + 1;
    let rule = gauss_hermite(quadrature_order_for(max_order))?;
    // integrand envelope e^{-(y - x/2)^2}; y = x/2 + u
    let mut left = Vec::with_capacity(rule.len());
    let mut right = Vec::with_capacity(rule.len());
    let mut buf = Vec::new();
    for &u in rule.nodes() {
        hermite_eval_all(max_order, u - 0.5 * x, &mut buf)?;
        left.push(buf.clone());
        hermite_eval_all(max_order, u + 0.5 * x, &mut buf)?;
        right.push(buf.clone());
    }
    let mut out = vec![0.0; size * size];
    for (k, w) in rule.scaled_weights().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let (a, b) = (&left[k], &right[k]);
        for m in 0..size {
            let wb = w * b[m];
            let row = &mut out[m * size..(m + 1) * size];
            for n in 0..size {
                row[n] += wb * a[n];
            }
        }
    }
    Ok(out)
}

/// `τ_x u` for a general expansion via tensor products of the 1-d
/// translation matrices. Translation is an `L²` isometry, so the dropped mass
/// is `(‖u‖₀² − ‖τ_x u‖₀²)^{1/2}` restricted to the truncation.
pub fn translate(u: &HermiteExpansion, x: &[f64]) -> Result<Truncated<HermiteExpansion>> {
    let d = u.dimension();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if x.iter().all(|v| *v == 0.0) {
        return Ok(Truncated {
            value: u.clone(),
            dropped_l2: 0.0,
        });
    }
    let n = u.max_order();
    let size1 = n + 1;
    let mats: Vec<Vec<f64>> = x
        .iter()
        .map(|&xi| translation_matrix(n, xi))
        .collect::<Result<_>>()?;
    let t = &u.truncation;
    let mut out = vec![0.0; t.size()];
    if d == 1 {
        let m0 = &mats[0];
        for (row, o) in out.iter_mut().enumerate() {
            *o = m0[row * size1..(row + 1) * size1]
                .iter()
                .zip(&u.coeffs)
                .map(|(a, b)| a * b)
                .sum();
        }
    } else {
        for (mo, m_entries) in t.iter().enumerate() {
            let mut acc = 0.0;
            for (c, n_entries) in u.coeffs.iter().zip(t.iter()) {
                if *c == 0.0 {
                    continue;
                }
                let mut term = *c;
                for axis in 0..d {
                    term *= mats[axis][m_entries[axis] as usize * size1 + n_entries[axis] as usize];
                }
                acc += term;
            }
            out[mo] = acc;
        }
    }
    let before: f64 = u.coeffs.iter().map(|c| c * c).sum();
    let after: f64 = out.iter().map(|c| c * c).sum();
    Ok(Truncated {
        value: HermiteExpansion {
            truncation: Arc::clone(t),
            coeffs: out,
            regularity: u.regularity,
        },
        dropped_l2: (before - after).max(0.0).sqrt(),
    })
}

/// `∫ u(y) v(y + shift) dy`, i.e. `⟨τ_{shift} u, v⟩` for truncated expansions.
///
/// Both factors carry the envelope `e^{-|y|²/2}` (shifted for `v`), so the
/// product is a polynomial against a Gaussian centred at `−shift/2` and a
/// tensor Gauss–Hermite rule integrates it exactly.
pub fn shifted_pairing(u: &HermiteExpansion, v: &HermiteExpansion, shift: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let d = u.dimension();
    if shift.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: shift.len(),
        });
    }
    let rule = gauss_hermite(quadrature_order_for(u.max_order().max(v.max_order())))?;
    let m = rule.len();
    // per-axis node tables for both factors
    let mut tab_u = vec![Vec::with_capacity(m); d];
    let mut tab_v = vec![Vec::with_capacity(m); d];
    for axis in 0..d {
        for &node in rule.nodes() {
            let y = node - 0.5 * shift[axis];
            let mut a = Vec::new();
            hermite_eval_all(u.max_order(), y, &mut a)?;
            let mut b = Vec::new();
            hermite_eval_all(v.max_order(), y + shift[axis], &mut b)?;
            tab_u[axis].push(a);
            tab_v[axis].push(b);
        }
    }
    let w = rule.scaled_weights();
    let mut counter = vec![0usize; d];
    let mut acc = CompensatedSum::new();
    let mut tables_u: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut tables_v: Vec<Vec<f64>> = vec![Vec::new(); d];
    loop {
        let mut weight = 1.0;
        for axis in 0..d {
            weight *= w[counter[axis]];
            tables_u[axis].clone_from(&tab_u[axis][counter[axis]]);
            tables_v[axis].clone_from(&tab_v[axis][counter[axis]]);
        }
        if weight != 0.0 {
            let a = u.evaluate_with_tables(&tables_u);
            let b = v.evaluate_with_tables(&tables_v);
            acc.add(weight * a * b);
        }
        // odometer over the tensor grid
        let mut axis = 0;
        loop {
            counter[axis] += 1;
            if counter[axis] < m {
                break;
            }
            counter[axis] = 0;
            axis += 1;
            if axis == d {
                return Ok(acc.value());
            }
        }
    }
}
