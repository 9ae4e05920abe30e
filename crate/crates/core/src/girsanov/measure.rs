use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde_engine::{DriftTable, PathEnsemble};
use crate::stats::{compensated_sum, mean_estimate, MeanEstimate};

fn check_grid(ensemble: &PathEnsemble, h: &DriftTable) -> Result<()> {
    if h.grid() != ensemble.grid() || h.dimension() != ensemble.dimension() {
        return Err(Error::GridMismatch(format!(
            "drift table (T={}, K={}, d={}) does not match ensemble (T={}, K={}, d={})",
            h.grid().horizon(),
            h.grid().steps(),
            h.dimension(),
            ensemble.grid().horizon(),
            ensemble.grid().steps(),
            ensemble.dimension()
        )));
    }
    Ok(())
}

/// `log M_T = Σ_j Σ_k h^j(t_k) ΔB^j_k − ½ Σ_k |h(t_k)|² dt` per path.
pub fn exponential_martingale(ensemble: &PathEnsemble, h: &DriftTable) -> Result<Vec<f64>> {
    check_grid(ensemble, h)?;
    let d = ensemble.dimension();
    let k_max = ensemble.grid().steps();
    let compensator = 0.5 * h.integral_of_square();
    Ok((0..ensemble.paths())
        .into_par_iter()
        .map(|m| {
            let inc = ensemble.path_increments(m);
            let stochastic = compensated_sum((0..k_max).flat_map(|k| {
                let hk = h.at(k);
                (0..d).map(move |j| hk[j] * inc[k * d + j])
            }));
            stochastic - compensator
        })
        .collect())
}

/// `exp((d/2) Σ_k h(t_k)² dt)` for the equal-component drift; `log_value`
/// stays finite when `value` overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovikovEstimate {
    pub value: f64,
    pub log_value: f64,
}

impl NovikovEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

pub fn novikov_estimate(h: &DriftTable) -> NovikovEstimate {
    // Σ_j h^j(t_k)² = |h(t_k)|², which is d h² for equal components
    let log_value = 0.5 * h.integral_of_square();
    NovikovEstimate {
        value: log_value.exp(),
        log_value,
    }
}

/// Same ensemble with increments `ΔB̂_k = ΔB_k − h(t_k) dt`.
pub fn transform_bm(ensemble: &PathEnsemble, h: &DriftTable) -> Result<PathEnsemble> {
    check_grid(ensemble, h)?;
    let d = ensemble.dimension();
    let k_max = ensemble.grid().steps();
    let dt = ensemble.grid().dt();
    let mut out = ensemble.increments().to_vec();
    out.par_chunks_mut(k_max * d).for_each(|path| {
        for k in 0..k_max {
            for (v, hj) in path[k * d..(k + 1) * d].iter_mut().zip(h.at(k)) {
                *v -= hj * dt;
            }
        }
    });
    Ok(ensemble.with_increment_values(out))
}

/// `exp(l − max l)`; ratio estimators are invariant under the common factor.
pub fn normalized_weights(log_weights: &[f64]) -> Vec<f64> {
    let top = log_weights
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    log_weights.iter().map(|l| (l - top).exp()).collect()
}

/// Self-normalized importance-sampling estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `(Σ w)² / Σ w²`.
    pub effective_sample_size: f64,
}

impl WeightedEstimate {
    pub fn within_sigmas(&self, target: f64, sigmas: f64) -> bool {
        (self.estimate - target).abs() <= sigmas * self.stderr
    }
}

/// `Σ w v / Σ w` with the delta-method standard error
/// `√(Σ w² (v − μ)²) / Σ w`.
pub fn weighted_expectation(values: &[f64], weights: &[f64]) -> Result<WeightedEstimate> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total = compensated_sum(weights.iter().copied());
    if !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let estimate = compensated_sum(values.iter().zip(weights).map(|(v, w)| v * w)) / total;
    let spread = compensated_sum(
        values
            .iter()
            .zip(weights)
            .map(|(v, w)| (w * (v - estimate)).powi(2)),
    );
    let squares = compensated_sum(weights.iter().map(|w| w * w));
    Ok(WeightedEstimate {
        estimate,
        stderr: spread.sqrt() / total,
        effective_sample_size: total * total / squares,
    })
}

/// Girsanov measure change `dQ/dP = M_T` with its diagnostics.
#[derive(Debug, Clone)]
pub struct MeasureChange {
    drift: DriftTable,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    novikov: NovikovEstimate,
    martingale_mean: MeanEstimate,
    effective_sample_size: f64,
}

impl MeasureChange {
    /// Weights on the increments of `ensemble` for the frozen drift `h`.
    pub fn new(ensemble: &PathEnsemble, h: DriftTable) -> Result<Self> {
        let log_weights = exponential_martingale(ensemble, &h)?;
        let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
        let martingale_mean = mean_estimate(&weights);
        let normalized = normalized_weights(&log_weights);
        let total: f64 = compensated_sum(normalized.iter().copied());
        let squares: f64 = compensated_sum(normalized.iter().map(|w| w * w));
        Ok(Self {
            novikov: novikov_estimate(&h),
            drift: h,
            log_weights,
            weights,
            martingale_mean,
            effective_sample_size: total * total / squares,
        })
    }

    pub fn drift(&self) -> &DriftTable {
        &self.drift
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `M_T` per path; `+∞` where the exponential overflows.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn overflowed(&self) -> usize {
        self.weights.iter().filter(|w| !w.is_finite()).count()
    }

    pub fn novikov(&self) -> NovikovEstimate {
        self.novikov
    }

    pub fn martingale_mean(&self) -> MeanEstimate {
        self.martingale_mean
    }

    pub fn effective_sample_size(&self) -> f64 {
        self.effective_sample_size
    }

    /// `E_Q[v]` over the given paths, with max-log normalized weights.
    pub fn expectation(&self, values: &[f64], paths: &[usize]) -> Result<WeightedEstimate> {
        let logs: Vec<f64> = paths.iter().map(|&m| self.log_weights[m]).collect();
        weighted_expectation(values, &normalized_weights(&logs))
    }

    pub fn weights_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{WEIGHTS_SCHEMA}").unwrap();
        writeln!(s, "path,log_weight").unwrap();
        for (m, l) in self.log_weights.iter().enumerate() {
            writeln!(s, "{m},{l:?}").unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{SUMMARY_SCHEMA}").unwrap();
        writeln!(
            s,
            "novikov_estimate,log_novikov,martingale_mean,stderr,effective_sample_size"
        )
        .unwrap();
        writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?}",
            self.novikov.value,
            self.novikov.log_value,
            self.martingale_mean.mean,
            self.martingale_mean.stderr,
            self.effective_sample_size
        )
        .unwrap();
        s
    }

    pub fn write_weights_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.weights_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.summary_csv()).map_err(|e| Error::io(path, e))
    }
}

pub const WEIGHTS_SCHEMA: &str = "#schema=girsanov_weights/1";
pub const SUMMARY_SCHEMA: &str = "#schema=girsanov_summary/1";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::{sample_brownian, TimeGrid};

    #[test]
    fn zero_drift_gives_unit_weights() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let e = sample_brownian(g, 2, 100, 9).unwrap();
        let mc = MeasureChange::new(&e, DriftTable::zero(g, 2)).unwrap();
        assert!(mc.weights().iter().all(|w| *w == 1.0));
        assert_eq!(mc.novikov().value, 1.0);
        let hat = transform_bm(&e, &DriftTable::zero(g, 2)).unwrap();
        assert_eq!(hat.increments(), e.increments());
    }

    #[test]
    fn log_weights_have_gaussian_moments() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let e = sample_brownian(g, 2, 100_000, 17).unwrap();
        let scalar: Vec<f64> = (0..=32).map(|k| 0.4 + 0.3 * (k as f64 / 32.0)).collect();
        let h = DriftTable::from_scalar(g, 2, &scalar).unwrap();
        let energy = h.integral_of_square();
        let logs = exponential_martingale(&e, &h).unwrap();
        let mean = mean_estimate(&logs);
        assert!(
            mean.within_sigmas(-0.5 * energy, 3.0),
            "{mean:?} vs {}",
            -0.5 * energy
        );
        // variance of the sample variance for a Gaussian is 2σ⁴/(n−1)
        let var = crate::stats::sample_variance(&logs);
        let se = energy * (2.0 / (logs.len() - 1) as f64).sqrt();
        assert!((var - energy).abs() < 3.0 * se, "{var} vs {energy}");
        let mc = MeasureChange::new(&e, h).unwrap();
        assert!(mc.martingale_mean().within_sigmas(1.0, 3.0));
    }

    #[test]
    fn novikov_closed_form() {
        let g = TimeGrid::new(2.0, 10).unwrap();
        let n = novikov_estimate(&DriftTable::constant(g, 3, 0.5).unwrap());
        assert!((n.value - (3.0 * 0.25 * 2.0 / 2.0f64).exp()).abs() < 1e-12);
        let huge = novikov_estimate(&DriftTable::constant(g, 1, 40.0).unwrap());
        assert!(!huge.is_finite());
        assert!((huge.log_value - 1600.0).abs() < 1e-9);
    }

    #[test]
    fn transformed_motion_is_q_brownian() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let e = sample_brownian(g, 1, 100_000, 23).unwrap();
        let h = DriftTable::constant(g, 1, 0.6).unwrap();
        let hat = transform_bm(&e, &h).unwrap();
        let bt: Vec<f64> = hat.terminal_brownian();
        let mc = MeasureChange::new(&e, h.clone()).unwrap();
        let paths: Vec<usize> = (0..bt.len()).collect();
        let q_mean = mc.expectation(&bt, &paths).unwrap();
        assert!(q_mean.within_sigmas(0.0, 3.0), "{q_mean:?}");
        let sq: Vec<f64> = bt.iter().map(|v| v * v).collect();
        assert!(mc.expectation(&sq, &paths).unwrap().within_sigmas(1.0, 3.0));
        let p_mean = mean_estimate(&bt);
        assert!(p_mean.within_sigmas(-0.6, 3.0), "{p_mean:?}");
    }

    #[test]
    fn weighted_expectation_edge_cases() {
        let v = [1.0, 2.0, 3.0, 6.0];
        let plain = weighted_expectation(&v, &[1.0; 4]).unwrap();
        assert!((plain.estimate - 3.0).abs() < 1e-15);
        assert!((plain.effective_sample_size - 4.0).abs() < 1e-12);
        let c = weighted_expectation(&[2.5; 3], &[0.1, 5.0, 3.0]).unwrap();
        assert!((c.estimate - 2.5).abs() < 1e-15);
        assert_eq!(c.stderr, 0.0);
        assert!(matches!(
            weighted_expectation(&v, &[0.0; 4]),
            Err(Error::ZeroTotalWeight)
        ));
        assert!(weighted_expectation(&v, &[1.0; 3]).is_err());
        let w = normalized_weights(&[1000.0, 999.0]);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn csv_outputs() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let e = sample_brownian(g, 1, 3, 2).unwrap();
        let mc = MeasureChange::new(&e, DriftTable::constant(g, 1, 0.1).unwrap()).unwrap();
        let w = mc.weights_csv();
        assert_eq!(w.lines().count(), 5);
        assert!(w.lines().nth(2).unwrap().starts_with("0,"));
        let s = mc.summary_csv();
        assert_eq!(s.lines().count(), 3);
    }
}
