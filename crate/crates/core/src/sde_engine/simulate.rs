use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spde_operators::SdeCoefficients;

use super::ensemble::{PathEnsemble, Scheme};
use super::grid::DriftTable;

/// A path whose state leaves `[−1e12, 1e12]^d` or turns non-finite is
/// stopped and flagged.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

fn exploded(z: &[f64]) -> bool {
    z.iter().any(|v| !(v.abs() <= EXPLOSION_THRESHOLD))
}

/// Euler–Maruyama `Z_{k+1} = Z_k + σ̄(Z_k) ΔB_k + b̄(Z_k) dt`.
pub fn simulate_base(
    coeffs: &dyn SdeCoefficients,
    z0: &[f64],
    ensemble: &PathEnsemble,
) -> Result<PathEnsemble> {
    run(coeffs, None, z0, ensemble)
}

/// Euler–Maruyama with drift `b̄_i − Σ_j h^j(t_k) σ̄_ij`.
pub fn simulate_modified(
    coeffs: &dyn SdeCoefficients,
    h: &DriftTable,
    z0: &[f64],
    ensemble: &PathEnsemble,
) -> Result<PathEnsemble> {
    if h.grid() != ensemble.grid() || h.dimension() != ensemble.dimension() {
        return Err(Error::GridMismatch(format!(
            "drift table on (T={}, K={}, d={}) does not match ensemble (T={}, K={}, d={})",
            h.grid().horizon(),
            h.grid().steps(),
            h.dimension(),
            ensemble.grid().horizon(),
            ensemble.grid().steps(),
            ensemble.dimension()
        )));
    }
    run(coeffs, Some(h), z0, ensemble)
}

/// One Euler–Maruyama step from `z` with increment `db`.
#[allow(clippy::too_many_arguments)]
pub fn em_step(
    coeffs: &dyn SdeCoefficients,
    h: Option<&[f64]>,
    z: &[f64],
    db: &[f64],
    dt: f64,
    sigma: &mut [f64],
    drift: &mut [f64],
    next: &mut [f64],
) {
    let d = z.len();
    coeffs.sigma(z, sigma);
    coeffs.drift(z, drift);
    for i in 0..d {
        let row = &sigma[i * d..(i + 1) * d];
        let mut noise = 0.0;
        for j in 0..d {
            noise += row[j] * db[j];
        }
        let mut b = drift[i];
        if let Some(h) = h {
            let mut corr = 0.0;
            for j in 0..d {
                corr += h[j] * row[j];
            }
            b -= corr;
        }
        next[i] = z[i] + noise + b * dt;
    }
}

fn run(
    coeffs: &dyn SdeCoefficients,
    h: Option<&DriftTable>,
    z0: &[f64],
    ensemble: &PathEnsemble,
) -> Result<PathEnsemble> {
    let d = ensemble.dimension();
    if coeffs.dimension() != d || z0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if coeffs.dimension() != d {
                coeffs.dimension()
            } else {
                z0.len()
            },
        });
    }
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let k_max = ensemble.grid().steps();
    let dt = ensemble.grid().dt();
    let per = (k_max + 1) * d;
    let mut states = vec![0.0; ensemble.paths() * per];
    let mut flags = vec![None; ensemble.paths()];
    states
        .par_chunks_mut(per)
        .zip(flags.par_iter_mut())
        .enumerate()
        .for_each(|(m, (traj, flag))| {
            let inc = ensemble.path_increments(m);
            traj[..d].copy_from_slice(z0);
            let mut sigma = vec![0.0; d * d];
            let mut drift = vec![0.0; d];
            let mut next = vec![0.0; d];
            for k in 0..k_max {
                let z = &traj[k * d..(k + 1) * d];
                em_step(
                    coeffs,
                    h.map(|t| t.at(k)),
                    z,
                    &inc[k * d..(k + 1) * d],
                    dt,
                    &mut sigma,
                    &mut drift,
                    &mut next,
                );
                if exploded(&next) {
                    *flag = Some(k + 1);
                    traj[(k + 1) * d..].iter_mut().for_each(|v| *v = f64::NAN);
                    return;
                }
                traj[(k + 1) * d..(k + 2) * d].copy_from_slice(&next);
            }
        });
    let scheme = if h.is_some() {
        Scheme::Modified
    } else {
        Scheme::Base
    };
    Ok(ensemble.with_states(states, None, flags, scheme, h.cloned()))
}

/// `Z_{k+1} = Z_k + 2 B_k ΔB_k + dt` per component, carrying `B` alongside.
pub fn simulate_example2(ensemble: &PathEnsemble) -> Result<PathEnsemble> {
    let d = ensemble.dimension();
    let k_max = ensemble.grid().steps();
    let dt = ensemble.grid().dt();
    let per = (k_max + 1) * d;
    let mut states = vec![0.0; ensemble.paths() * per];
    let mut aux = vec![0.0; ensemble.paths() * per];
    let mut flags = vec![None; ensemble.paths()];
    states
        .par_chunks_mut(per)
        .zip(aux.par_chunks_mut(per))
        .zip(flags.par_iter_mut())
        .enumerate()
        .for_each(|(m, ((z, b), flag))| {
            let inc = ensemble.path_increments(m);
            for k in 0..k_max {
                for j in 0..d {
                    let db = inc[k * d + j];
                    b[(k + 1) * d + j] = b[k * d + j] + db;
                    z[(k + 1) * d + j] = z[k * d + j] + 2.0 * b[k * d + j] * db + dt;
                }
                if exploded(&z[(k + 1) * d..(k + 2) * d]) {
                    *flag = Some(k + 1);
                    z[(k + 1) * d..].iter_mut().for_each(|v| *v = f64::NAN);
                    return;
                }
            }
        });
    Ok(ensemble.with_states(states, Some(aux), flags, Scheme::Example2, None))
}

/// `|Z_T − B_T²|` per active path of an [`simulate_example2`] ensemble.
pub fn example2_terminal_error(ensemble: &PathEnsemble) -> Result<Vec<f64>> {
    if ensemble.scheme() != Scheme::Example2 {
        return Err(Error::ConfigurationMismatch(
            "terminal error needs an Example 2 ensemble".into(),
        ));
    }
    let d = ensemble.dimension();
    let k = ensemble.grid().steps();
    Ok(ensemble
        .active_paths()
        .map(|m| {
            let z = ensemble.state(m, k).expect("states present");
            let b = &ensemble.path_auxiliary(m).expect("auxiliary present")[k * d..];
            z.iter()
                .zip(b)
                .map(|(z, b)| (z - b * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Realized quadratic variation `Σ_k (Z_{k+1} − Z_k)²` of the first component.
pub fn realized_quadratic_variation(ensemble: &PathEnsemble, path: usize) -> Result<f64> {
    let d = ensemble.dimension();
    let z = ensemble
        .path_states(path)
        .ok_or_else(|| Error::ConfigurationMismatch("ensemble has no states".into()))?;
    Ok((0..ensemble.grid().steps())
        .map(|k| (z[(k + 1) * d] - z[k * d]).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::{sample_brownian, TimeGrid};
    use crate::spde_operators::FnCoefficients;

    fn unit() -> impl SdeCoefficients {
        FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 1.0,
            |_: &[f64], b: &mut [f64]| b[0] = 0.0,
        )
    }

    #[test]
    fn unit_diffusion_reproduces_brownian_path() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let e = sample_brownian(g, 1, 20, 4).unwrap();
        let z = simulate_base(&unit(), &[0.0], &e).unwrap();
        for m in 0..20 {
            assert_eq!(z.path_states(m).unwrap(), e.brownian_path(m).as_slice());
        }
        assert_eq!(z.flagged_count(), 0);
    }

    #[test]
    fn pure_drift_gives_grid_times() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let e = sample_brownian(g, 1, 3, 4).unwrap();
        let c = FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |_: &[f64], b: &mut [f64]| b[0] = 1.0,
        );
        let z = simulate_base(&c, &[0.0], &e).unwrap();
        for k in 0..=10 {
            assert!((z.state(1, k).unwrap()[0] - g.time(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_drift_table_is_bitwise_base() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let e = sample_brownian(g, 2, 10, 11).unwrap();
        let c = FnCoefficients::new(
            2,
            |z: &[f64], s: &mut [f64]| {
                s[0] = 1.0 + 0.1 * z[1].sin();
                s[1] = 0.3;
                s[2] = -0.2;
                s[3] = z[0].cos();
            },
            |z: &[f64], b: &mut [f64]| {
                b[0] = -z[0];
                b[1] = -0.0;
            },
        );
        let base = simulate_base(&c, &[0.1, -0.2], &e).unwrap();
        let modified = simulate_modified(&c, &DriftTable::zero(g, 2), &[0.1, -0.2], &e).unwrap();
        for m in 0..10 {
            let a = base.path_states(m).unwrap();
            let b = modified.path_states(m).unwrap();
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(modified.scheme(), Scheme::Modified);
    }

    #[test]
    fn modified_unit_diffusion_subtracts_drift_integral() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let e = sample_brownian(g, 1, 5, 2).unwrap();
        let h =
            DriftTable::from_scalar(g, 1, &(0..=16).map(|k| 0.1 * k as f64).collect::<Vec<_>>())
                .unwrap();
        let z = simulate_modified(&unit(), &h, &[0.0], &e).unwrap();
        for m in 0..5 {
            let b = e.brownian_path(m);
            for k in 0..=16 {
                let expect = b[k] - h.cumulative(k)[0];
                assert!((z.state(m, k).unwrap()[0] - expect).abs() < 1e-13);
            }
        }
        // σ̄ ≡ 0 ignores h
        let still = FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |_: &[f64], b: &mut [f64]| b[0] = 0.5,
        );
        let a = simulate_base(&still, &[0.0], &e).unwrap();
        let bb = simulate_modified(&still, &h, &[0.0], &e).unwrap();
        assert_eq!(a.path_states(3), bb.path_states(3));
        let wrong = DriftTable::zero(TimeGrid::new(1.0, 8).unwrap(), 1);
        assert!(simulate_modified(&unit(), &wrong, &[0.0], &e).is_err());
    }

    #[test]
    fn explosion_is_flagged() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let e = sample_brownian(g, 1, 4, 0).unwrap();
        let c = FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |z: &[f64], b: &mut [f64]| b[0] = z[0] * z[0] * 1e3,
        );
        let z = simulate_base(&c, &[1.0], &e).unwrap();
        assert_eq!(z.flagged_count(), 4);
        assert!(z.flag(0).unwrap() < 50);
        assert_eq!(z.active_paths().count(), 0);
    }

    #[test]
    fn gbm_strong_error_is_half_order() {
        // dZ = Z dt + Z dB, Z_T = exp(T/2 + B_T)
        let fine = TimeGrid::new(1.0, 1024).unwrap();
        let base = sample_brownian(fine, 1, 2000, 5).unwrap();
        let c = FnCoefficients::new(
            1,
            |z: &[f64], s: &mut [f64]| s[0] = z[0],
            |z: &[f64], b: &mut [f64]| b[0] = z[0],
        );
        let exact: Vec<f64> = base
            .terminal_brownian()
            .iter()
            .map(|b| (0.5 + b).exp())
            .collect();
        let mut errs = Vec::new();
        let mut dts = Vec::new();
        for factor in [16, 8, 4, 2, 1] {
            let e = base.coarsen(factor).unwrap();
            let z = simulate_base(&c, &[1.0], &e).unwrap();
            let k = e.grid().steps();
            let err: f64 = (0..2000)
                .map(|m| (z.state(m, k).unwrap()[0] - exact[m]).abs())
                .sum::<f64>()
                / 2000.0;
            errs.push(err.ln());
            dts.push(e.grid().dt().ln());
        }
        let fit = crate::stats::fit_line(&dts, &errs, None);
        assert!((fit.slope - 0.5).abs() < 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn weak_consistency_for_brownian_motion() {
        // E e^{−B_T²/2} = 1/√(1 + T)
        let g = TimeGrid::new(1.0, 8).unwrap();
        let e = sample_brownian(g, 1, 100_000, 21).unwrap();
        let z = simulate_base(&unit(), &[0.0], &e).unwrap();
        let vals: Vec<f64> = (0..100_000)
            .map(|m| (-0.5 * z.state(m, 8).unwrap()[0].powi(2)).exp())
            .collect();
        let est = crate::stats::mean_estimate(&vals);
        assert!(est.within_sigmas(1.0 / 2f64.sqrt(), 3.0));
    }

    #[test]
    fn example2_tracks_b_squared() {
        let fine = TimeGrid::new(1.0, 512).unwrap();
        let base = sample_brownian(fine, 1, 2000, 8).unwrap();
        let mut means = Vec::new();
        for factor in [8, 4, 2, 1] {
            let e = base.coarsen(factor).unwrap();
            let z = simulate_example2(&e).unwrap();
            let errs = example2_terminal_error(&z).unwrap();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            // Z_K − B_T² = Σ (dt − ΔB²) ≈ N(0, 2 T dt)
            let expected = (2.0 / std::f64::consts::PI).sqrt() * (2.0 * e.grid().dt()).sqrt();
            assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
            means.push(mean);
        }
        for w in means.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 1.2 && ratio < 1.65, "{ratio}");
        }
        // zero noise gives Z_t = t
        let g = TimeGrid::new(2.0, 4).unwrap();
        let quiet = PathEnsemble::from_increments(g, 1, vec![0.0; 4], 0).unwrap();
        let z = simulate_example2(&quiet).unwrap();
        for k in 0..=4 {
            assert!((z.state(0, k).unwrap()[0] - g.time(k)).abs() < 1e-15);
        }
        // realized quadratic variation ≈ ∫ 4 B² ds on the same path
        let z = simulate_example2(&base).unwrap();
        let b = base.brownian_path(0);
        let riemann: f64 = (0..512).map(|k| 4.0 * b[k] * b[k] * fine.dt()).sum();
        let qv = realized_quadratic_variation(&z, 0).unwrap();
        assert!(
            (qv - riemann).abs() < 0.2 * riemann.max(0.05),
            "{qv} vs {riemann}"
        );
    }
}
