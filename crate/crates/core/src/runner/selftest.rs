use crate::distribution_space::{ground_state, norm_p, pair, DeltaFamily};
use crate::error::Result;
use crate::girsanov::MeasureChange;
use crate::hermite_basis::{gauss_hermite, hermite_eval, quadrature_order_for};
use crate::sde_engine::{sample_brownian, DriftTable, TimeGrid};
use crate::stats::mean_estimate;

use super::pipeline::Check;

const SELFTEST_SEED: u64 = 7;
const SELFTEST_PATHS: usize = 20_000;

fn orthonormality() -> Result<Check> {
    let n = 24;
    let rule = gauss_hermite(quadrature_order_for(n))?;
    let mut worst = 0.0f64;
    for i in 0..=n {
        for j in 0..=i {
            let v = rule.integrate_unweighted(|x| {
                hermite_eval(i, x).unwrap() * hermite_eval(j, x).unwrap()
            });
            worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(Check {
        name: "hermite_orthonormality".into(),
        pass: worst < 1e-12,
        detail: format!("max |<h_i,h_j> − δ_ij| = {worst:.2e} for i,j ≤ {n}"),
    })
}

fn ground_state_norm() -> Result<Check> {
    let g = ground_state(1, 16)?;
    let worst = [-1.3, 0.0, 0.4, 2.0]
        .iter()
        .map(|&p| (norm_p(&g.clone().with_regularity(p), p) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Check {
        name: "ground_state_norm".into(),
        pass: worst < 1e-14,
        detail: format!("max |‖h_0‖_p − 1| = {worst:.2e}"),
    })
}

fn delta_pairing() -> Result<Check> {
    let g = ground_state(1, 40)?;
    let mut worst = 0.0f64;
    for x in [-2.0, -0.5, 0.0, 1.1] {
        let delta = DeltaFamily::new(vec![x])?.materialize_order(40)?;
        worst = worst.max((pair(&delta, &g)? - hermite_eval(0, x)?).abs());
    }
    Ok(Check {
        name: "delta_pairing".into(),
        pass: worst < 1e-13,
        detail: format!("max |<δ_x,h_0> − h_0(x)| = {worst:.2e}"),
    })
}

fn brownian_moment() -> Result<Check> {
    let grid = TimeGrid::new(1.0, 16)?;
    let e = sample_brownian(grid, 1, SELFTEST_PATHS, SELFTEST_SEED)?;
    let values: Vec<f64> = e
        .terminal_brownian()
        .iter()
        .map(|b| (-b * b / 2.0).exp())
        .collect();
    let est = mean_estimate(&values);
    let exact = std::f64::consts::FRAC_1_SQRT_2;
    Ok(Check {
        name: "brownian_gaussian_moment".into(),
        pass: est.within_sigmas(exact, 4.0),
        detail: format!(
            "E exp(−B_1²/2) = {:.5} ± {:.1e}, exact {exact:.5}",
            est.mean, est.stderr
        ),
    })
}

fn martingale_mean() -> Result<Check> {
    let grid = TimeGrid::new(1.0, 16)?;
    let e = sample_brownian(grid, 1, SELFTEST_PATHS, SELFTEST_SEED + 1)?;
    let mc = MeasureChange::new(&e, DriftTable::constant(grid, 1, 0.5)?)?;
    let m = mc.martingale_mean();
    let exact = (0.125f64).exp();
    let nov = mc.novikov().value;
    Ok(Check {
        name: "girsanov_martingale".into(),
        pass: m.within_sigmas(1.0, 4.0) && (nov - exact).abs() < 1e-12,
        detail: format!(
            "E M_T = {:.5} ± {:.1e}; Novikov {nov:.6} vs e^(1/8)",
            m.mean, m.stderr
        ),
    })
}

/// Fast analytic oracles over the numerical core.
pub fn selftest() -> Result<Vec<Check>> {
    Ok(vec![
        orthonormality()?,
        ground_state_norm()?,
        delta_pairing()?,
        brownian_moment()?,
        martingale_mean()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in selftest().unwrap() {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }
}
