use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::distribution_space::{delta_tail, squared_norm_p, DeltaFamily, Distribution};
use crate::error::{Error, Result};
use crate::hermite_basis::{gauss_hermite, hermite_eval_all, MAX_QUADRATURE_ORDER};
use crate::sde_engine::{DriftTable, PathEnsemble, TimeGrid};
use crate::stats::{mean_estimate, MeanEstimate};

/// `‖X_{t_k}‖²_q` for `X_t = τ_{Z_t} φ`, laid out `[m][k]`.
///
/// Entries at or after a path's explosion step are NaN.
pub fn squared_norm_table(
    ensemble: &PathEnsemble,
    phi: &Distribution,
    q: f64,
    max_order: usize,
) -> Result<Vec<f64>> {
    if !ensemble.has_states() {
        return Err(Error::ConfigurationMismatch(
            "norm table needs simulated states".into(),
        ));
    }
    let d = ensemble.dimension();
    if phi.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phi.dimension(),
        });
    }
    let per = ensemble.grid().steps() + 1;
    let mut out = vec![f64::NAN; ensemble.paths() * per];
    out.par_chunks_mut(per)
        .enumerate()
        .try_for_each(|(m, row)| -> Result<()> {
            let stop = ensemble.flag(m).unwrap_or(per);
            for (k, slot) in row.iter_mut().enumerate().take(stop) {
                let z = ensemble.state(m, k).expect("states present");
                *slot = squared_norm_at(phi, z, q, max_order)?;
            }
            Ok(())
        })?;
    Ok(out)
}

fn squared_norm_at(phi: &Distribution, z: &[f64], q: f64, max_order: usize) -> Result<f64> {
    match phi {
        Distribution::Delta(delta) => {
            let est = delta.translate(z)?.norm(q, max_order)?;
            Ok(est.total().powi(2))
        }
        other => {
            let moved = other.translate(z)?.materialize(max_order)?;
            Ok(squared_norm_p(&moved.value, q))
        }
    }
}

/// Per-time Monte Carlo estimate of `E‖X_{t_k}‖²` over the paths still
/// alive at `t_k`.
pub fn norm_means(
    norms: &[f64],
    flags: &[Option<usize>],
    grid: &TimeGrid,
) -> Result<Vec<MeanEstimate>> {
    let per = grid.steps() + 1;
    if norms.len() != flags.len() * per {
        return Err(Error::GridMismatch(format!(
            "{} norm values do not fill {} paths of {per} times",
            norms.len(),
            flags.len()
        )));
    }
    let mut column = Vec::with_capacity(flags.len());
    (0..per)
        .map(|k| {
            column.clear();
            column.extend(
                flags
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.is_none_or(|s| s > k))
                    .map(|(m, _)| norms[m * per + k])
                    .filter(|v| v.is_finite()),
            );
            if column.is_empty() {
                return Err(Error::AllPathsFlagged { step: k });
            }
            Ok(mean_estimate(&column))
        })
        .collect()
}

/// `h^j(t_k) = √(mean over paths of ‖X_{t_k}‖²_{−p−1})`, equal for every `j`.
pub fn estimate_h(
    norms: &[f64],
    flags: &[Option<usize>],
    grid: &TimeGrid,
    dimension: usize,
) -> Result<DriftTable> {
    let means = norm_means(norms, flags, grid)?;
    let scalar: Vec<f64> = means.iter().map(|e| e.mean.max(0.0).sqrt()).collect();
    DriftTable::from_scalar(*grid, dimension, &scalar)
}

/// `h(t_k)` with a delta-method standard error `se(h²) / (2h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPoint {
    pub t: f64,
    pub h: f64,
    pub stderr: f64,
}

pub fn drift_with_errors(
    norms: &[f64],
    flags: &[Option<usize>],
    grid: &TimeGrid,
) -> Result<Vec<DriftPoint>> {
    let means = norm_means(norms, flags, grid)?;
    Ok(means
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let h = e.mean.max(0.0).sqrt();
            DriftPoint {
                t: grid.time(k),
                h,
                stderr: if h > 0.0 {
                    e.stderr / (2.0 * h)
                } else {
                    e.stderr.sqrt()
                },
            }
        })
        .collect())
}

/// `E‖δ_{a + B_t}‖²_q` in one dimension by Gauss–Hermite quadrature against
/// the `N(a, t)` density.
///
/// The truncated part `Σ_{n≤N} (2n+1)^{2q} h_n(y)²` carries `e^{−y²}`, so the
/// rule is matched to `e^{−y² − (y−a)²/(2t)}` and integrates it exactly.
/// The tail is integrated against the density alone.
pub fn expected_delta_norm_sq(a: f64, t: f64, q: f64, max_order: usize) -> Result<f64> {
    let delta = DeltaFamily::new(vec![a])?;
    if t == 0.0 {
        return Ok(delta.norm(q, max_order)?.total().powi(2));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time must be non-negative, got {t}"
        )));
    }
    let weights: Vec<f64> = (0..=max_order)
        .map(|n| ((2 * n + 1) as f64).powf(2.0 * q))
        .collect();
    let rule = gauss_hermite((max_order + 32).min(MAX_QUADRATURE_ORDER))?;
    let density = |y: f64| (-(y - a).powi(2) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    let alpha = 1.0 + 1.0 / (2.0 * t);
    let center = a / (2.0 * t) / alpha;
    let mut values = Vec::with_capacity(max_order + 1);
    let mut truncated = 0.0;
    let s = 1.0 / alpha.sqrt();
    for (x, w) in rule.nodes().iter().zip(rule.scaled_weights()) {
        let y = center + s * x;
        hermite_eval_all(max_order, y, &mut values)?;
        let f: f64 = values.iter().zip(&weights).map(|(v, c)| c * v * v).sum();
        truncated += s * w * f * density(y);
    }
    let tail = rule.integrate_matched(a, 1.0 / (2.0 * t), |y| {
        delta_tail(1, y * y, q, max_order) * density(y)
    });
    Ok(truncated + tail)
}

/// Quadrature drift `h(t_k) = √(E‖δ_{a+B_{t_k}}‖²_{−p−1})` for `d = 1`.
pub fn quadrature_h(grid: &TimeGrid, a: f64, p: f64, max_order: usize) -> Result<Vec<f64>> {
    (0..=grid.steps())
        .map(|k| Ok(expected_delta_norm_sq(a, grid.time(k), -p - 1.0, max_order)?.sqrt()))
        .collect()
}

/// `exp(½ Σ_k E‖δ_{a+B_{t_k}}‖²_{−p} dt)` (left-point sum), a majorant for
/// the Novikov value of the one-dimensional delta example.
pub fn novikov_majorant(grid: &TimeGrid, a: f64, p: f64, max_order: usize) -> Result<(f64, f64)> {
    let dt = grid.dt();
    let mut log = 0.0;
    for k in 0..grid.steps() {
        log += 0.5 * expected_delta_norm_sq(a, grid.time(k), -p, max_order)? * dt;
    }
    Ok((log.exp(), log))
}

pub const H_TABLE_SCHEMA: &str = "#schema=h_table/1";

/// `t,h` rows of the first component.
pub fn h_table_csv(h: &DriftTable) -> String {
    let mut s = String::new();
    writeln!(s, "{H_TABLE_SCHEMA}").unwrap();
    writeln!(s, "t,h").unwrap();
    for (k, v) in h.scalar().iter().enumerate() {
        writeln!(s, "{:?},{:?}", h.grid().time(k), v).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::{ground_state, norm_p};
    use crate::sde_engine::{sample_brownian, simulate_base};
    use crate::spde_operators::FnCoefficients;

    fn frozen() -> impl crate::spde_operators::SdeCoefficients {
        FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |_: &[f64], b: &mut [f64]| b[0] = 0.0,
        )
    }

    #[test]
    fn constant_process_gives_constant_drift() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let e = sample_brownian(g, 1, 5, 1).unwrap();
        let z = simulate_base(&frozen(), &[0.0], &e).unwrap();
        let phi = Distribution::expansion(ground_state(1, 10).unwrap());
        let norms = squared_norm_table(&z, &phi, -1.3, 10).unwrap();
        let h = estimate_h(&norms, z.flags(), &g, 1).unwrap();
        let expect = norm_p(&ground_state(1, 10).unwrap(), -1.3);
        for v in h.scalar() {
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn initial_drift_is_the_base_norm() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let e = sample_brownian(g, 2, 50, 3).unwrap();
        let unit = FnCoefficients::new(
            2,
            |_: &[f64], s: &mut [f64]| s.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]),
            |_: &[f64], b: &mut [f64]| b.fill(0.0),
        );
        let z = simulate_base(&unit, &[0.0, 0.0], &e).unwrap();
        let phi = Distribution::delta(vec![0.0, 0.0]).unwrap();
        let norms = squared_norm_table(&z, &phi, -2.0, 40).unwrap();
        let h = estimate_h(&norms, z.flags(), &g, 2).unwrap();
        let exact = DeltaFamily::origin(2)
            .unwrap()
            .norm(-2.0, 40)
            .unwrap()
            .total();
        assert_eq!(h.at(0)[0], exact);
        assert_eq!(h.at(3)[0], h.at(3)[1]);
        assert!(h.components_equal());
    }

    #[test]
    fn all_flagged_is_an_error() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let norms = vec![1.0; 6];
        let flags = vec![Some(1), Some(2)];
        assert!(matches!(
            estimate_h(&norms, &flags, &g, 1),
            Err(Error::AllPathsFlagged { step: 2 })
        ));
    }

    #[test]
    fn quadrature_matches_brute_force_expectation() {
        // E f(B_t) by a fine trapezoid on [−12, 12]
        let (t, q, n) = (0.5, -1.3, 60);
        let quad = expected_delta_norm_sq(0.3, t, q, n).unwrap();
        let steps = 24_000;
        let hstep = 24.0 / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let y = -12.0 + i as f64 * hstep;
            let f = DeltaFamily::new(vec![y])
                .unwrap()
                .norm(q, n)
                .unwrap()
                .total()
                .powi(2);
            let dens = (-(y - 0.3f64).powi(2) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
            acc += if i == 0 || i == steps { 0.5 } else { 1.0 } * f * dens * hstep;
        }
        assert!((quad - acc).abs() < 1e-8 * acc, "{quad} vs {acc}");
    }

    #[test]
    fn majorant_dominates_drift_energy() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let h = quadrature_h(&g, 0.0, 0.3, 100).unwrap();
        let energy: f64 = h[..16].iter().map(|v| v * v * g.dt()).sum();
        let (value, log) = novikov_majorant(&g, 0.0, 0.3, 100).unwrap();
        assert!(value.is_finite());
        assert!(0.5 * energy < log);
    }

    #[test]
    fn h_table_has_header_and_rows() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let h = DriftTable::from_scalar(g, 1, &[1.0, 0.5, 0.25]).unwrap();
        let csv = h_table_csv(&h);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], H_TABLE_SCHEMA);
        assert_eq!(lines[1], "t,h");
        assert_eq!(lines[3], "0.5,0.5");
        assert_eq!(lines.len(), 5);
    }
}
