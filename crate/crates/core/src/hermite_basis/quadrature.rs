//! Gauss–Hermite quadrature for the weight `e^{-x²}`.
//!
//! Nodes come from the eigenvalues of the symmetric Jacobi matrix and are
//! polished by Newton steps on `h_m`. Weights use the Christoffel form
//! `w_k e^{x_k²} = 1 / (m h_{m-1}(x_k)²)`, which stays accurate at the outer
//! nodes where `w_k` itself underflows.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::functions::scaled_pair;

pub const MAX_QUADRATURE_ORDER: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    scaled_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for `∫ f(x) e^{-x²} dx ≈ Σ w_k f(x_k)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights with the Gaussian factor removed: `∫ g(x) dx ≈ Σ w_k e^{x_k²} g(x_k)`.
    pub fn scaled_weights(&self) -> &[f64] {
        &self.scaled_weights
    }

    /// `∫ f(x) e^{-x²} dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// `∫ g(x) dx` for `g` with Gaussian decay.
    pub fn integrate_unweighted<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(x, w)| w * g(*x))
            .sum()
    }

    /// `∫ g(y) dy` where `g` carries the envelope `e^{-α (y - center)²}`:
    /// nodes are mapped by `y = center + x / √α`.
    pub fn integrate_matched<F: Fn(f64) -> f64>(&self, center: f64, alpha: f64, g: F) -> f64 {
        let s = 1.0 / alpha.sqrt();
        s * self
            .nodes
            .iter()
            .zip(&self.scaled_weights)
            .map(|(x, w)| w * g(center + s * x))
            .sum::<f64>()
    }
}

/// `m`-point Gauss–Hermite rule; rules are cached and shared.
pub fn gauss_hermite(m: usize) -> Result<Arc<QuadratureRule>> {
    if !(1..=MAX_QUADRATURE_ORDER).contains(&m) {
        return Err(Error::QuadratureOrder(m));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&m) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(build(m));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(m, Arc::clone(&rule));
    Ok(rule)
}

/// Node count for integrating products involving `h_n`, `n <= max_order`.
pub fn quadrature_order_for(max_order: usize) -> usize {
    (2 * max_order + 16).clamp(max_order + 1, MAX_QUADRATURE_ORDER)
}

fn build(m: usize) -> QuadratureRule {
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let two_m = (2.0 * m as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (hm, hm1, _) = scaled_pair(m, *x);
            // h_m' = √(2m) h_{m-1} − x h_m, both sharing the same scale
            let deriv = two_m * hm1 - *x * hm;
            if deriv == 0.0 {
                break;
            }
            let step = hm / deriv;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    for k in 0..m / 2 {
        let sym = 0.5 * (nodes[m - 1 - k] - nodes[k]);
        nodes[k] = -sym;
        nodes[m - 1 - k] = sym;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }

    let ln_m = (m as f64).ln();
    let scaled_weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, hm1, ln_scale) = scaled_pair(m, x);
            // 1 / (m h_{m-1}²) with h_{m-1} = hm1 e^{ln_scale}
            (-2.0 * ln_scale - ln_m - 2.0 * hm1.abs().ln()).exp()
        })
        .collect();
    let weights = nodes
        .iter()
        .zip(&scaled_weights)
        .map(|(x, w)| w * (-x * x).exp())
        .collect();
    QuadratureRule {
        nodes,
        weights,
        scaled_weights,
    }
}
