use std::fmt::Write as _;

use rayon::prelude::*;

use crate::distribution_space::Distribution;
use crate::error::{Error, Result};
use crate::sde_engine::{em_step, DriftTable, PathEnsemble, Scheme};
use crate::spde_operators::{
    form_a, form_l, form_l_hat, pullback_coeffs, CoefficientField, DifferentialForm,
};
use crate::stats::{fit_line, mean_estimate, MeanEstimate};

use super::lift::{LiftedPaths, PreparedTest};

/// Drift terms (summed in order) and one diffusion form per noise component.
#[derive(Debug, Clone, PartialEq)]
pub struct StepForms {
    pub drift: Vec<DifferentialForm>,
    pub diffusion: Vec<DifferentialForm>,
}

/// Operator coefficients along a path, `dX = Σ drift(X) dt + Σ_j diffusion_j(X) dW^j`.
pub trait PathForms: Sync {
    fn dimension(&self) -> usize;
    fn forms(&self, path: usize, k: usize, state: &Distribution) -> Result<StepForms>;
}

/// `dX = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroForms(pub usize);

impl PathForms for ZeroForms {
    fn dimension(&self) -> usize {
        self.0
    }

    fn forms(&self, _: usize, _: usize, _: &Distribution) -> Result<StepForms> {
        Ok(StepForms {
            drift: vec![DifferentialForm::zero(self.0)],
            diffusion: (0..self.0)
                .map(|_| DifferentialForm::zero(self.0))
                .collect(),
        })
    }
}

/// `dX = L(X) dt + A(X)·dB`.
#[derive(Debug, Clone, Copy)]
pub struct FieldForms<'a> {
    pub field: &'a CoefficientField,
}

impl PathForms for FieldForms<'_> {
    fn dimension(&self) -> usize {
        self.field.dimension()
    }

    fn forms(&self, _: usize, _: usize, state: &Distribution) -> Result<StepForms> {
        Ok(StepForms {
            drift: vec![form_l(self.field, state)?],
            diffusion: (0..self.field.dimension())
                .map(|j| form_a(self.field, state, j))
                .collect::<Result<_>>()?,
        })
    }
}

/// `dX = (L + L̂_{h(t)})(X) dt + A(X)·dB`.
#[derive(Debug, Clone, Copy)]
pub struct ModifiedForms<'a> {
    pub field: &'a CoefficientField,
    pub h: &'a DriftTable,
}

impl PathForms for ModifiedForms<'_> {
    fn dimension(&self) -> usize {
        self.field.dimension()
    }

    fn forms(&self, _: usize, k: usize, state: &Distribution) -> Result<StepForms> {
        Ok(StepForms {
            drift: vec![
                form_l(self.field, state)?,
                form_l_hat(self.field, state, self.h.at(k))?,
            ],
            diffusion: (0..self.field.dimension())
                .map(|j| form_a(self.field, state, j))
                .collect::<Result<_>>()?,
        })
    }
}

/// `dX = Σ_i (2 B_i² ∂²_ii − ∂_i) X dt − Σ_i 2 B_i ∂_i X dB^i` with `B` read
/// from the auxiliary trajectory of a squared-Brownian ensemble.
#[derive(Debug, Clone, Copy)]
pub struct Example2Forms<'a> {
    pub ensemble: &'a PathEnsemble,
}

impl PathForms for Example2Forms<'_> {
    fn dimension(&self) -> usize {
        self.ensemble.dimension()
    }

    fn forms(&self, path: usize, k: usize, _: &Distribution) -> Result<StepForms> {
        let d = self.ensemble.dimension();
        let aux = self.ensemble.path_auxiliary(path).ok_or_else(|| {
            Error::ConfigurationMismatch("squared-Brownian forms need the auxiliary B path".into())
        })?;
        let b = &aux[k * d..(k + 1) * d];
        let mut second = vec![0.0; d * d];
        for i in 0..d {
            second[i * d + i] = 2.0 * b[i] * b[i];
        }
        let drift = DifferentialForm::new(d, vec![-1.0; d], second)?;
        let diffusion = (0..d)
            .map(|j| {
                let mut first = vec![0.0; d];
                first[j] = -2.0 * b[j];
                DifferentialForm::new(d, first, vec![0.0; d * d])
            })
            .collect::<Result<_>>()?;
        Ok(StepForms {
            drift: vec![drift],
            diffusion,
        })
    }
}

/// Residual statistics for one test function on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    /// `|R(T)|`.
    pub mean_abs: MeanEstimate,
    /// `R(T)`.
    pub signed: MeanEstimate,
    /// `sup_k |R(t_k)|`.
    pub mean_sup: MeanEstimate,
    pub n_paths: usize,
}

/// Residuals of one identity on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualLevel {
    pub dt: f64,
    pub steps: usize,
    /// Active paths, in order.
    pub paths: Vec<usize>,
    /// `R(T)` per test function, per active path.
    pub terminal: Vec<Vec<f64>>,
    pub stats: Vec<ResidualStats>,
}

/// `R(t_n) = ⟨X_{t_n}, ψ⟩ − ⟨X_0, ψ⟩ − Σ_{k<n} [⟨drift(X_{t_k}), ψ⟩ dt + Σ_j ⟨diffusion_j(X_{t_k}), ψ⟩ ΔW^j_k]`
/// with `ΔW` the increments of `noise`.
pub fn spde_residual(
    lifted: &LiftedPaths<'_>,
    noise: &PathEnsemble,
    forms: &dyn PathForms,
    panel: &[PreparedTest],
) -> Result<ResidualLevel> {
    let states = lifted.ensemble();
    if noise.grid() != states.grid() || noise.paths() != states.paths() {
        return Err(Error::GridMismatch(format!(
            "noise (K={}, M={}) does not match states (K={}, M={})",
            noise.grid().steps(),
            noise.paths(),
            states.grid().steps(),
            states.paths()
        )));
    }
    let d = states.dimension();
    if noise.dimension() != d || forms.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if noise.dimension() != d {
                noise.dimension()
            } else {
                forms.dimension()
            },
        });
    }
    if panel.is_empty() {
        return Err(Error::InvalidArgument("empty test-function panel".into()));
    }
    let k_max = states.grid().steps();
    let dt = states.grid().dt();
    let paths: Vec<usize> = states.active_paths().collect();
    // per path: (R(T), sup |R|) for every test function
    let per_path: Vec<Vec<(f64, f64)>> = paths
        .par_iter()
        .map(|&m| -> Result<Vec<(f64, f64)>> {
            let inc = noise.path_increments(m);
            let mut start = Vec::with_capacity(panel.len());
            let mut integral = vec![0.0; panel.len()];
            let mut sup = vec![0.0f64; panel.len()];
            let mut last = vec![0.0; panel.len()];
            for k in 0..=k_max {
                let state = lifted.state(m, k)?;
                let step = if k < k_max {
                    Some(forms.forms(m, k, &state)?)
                } else {
                    None
                };
                for (i, psi) in panel.iter().enumerate() {
                    let jet = lifted.jet(m, k, psi)?;
                    if k == 0 {
                        start.push(jet.value);
                    } else {
                        let r = jet.value - start[i] - integral[i];
                        sup[i] = sup[i].max(r.abs());
                        last[i] = r;
                    }
                    if let Some(step) = &step {
                        let mut drift = 0.0;
                        for f in &step.drift {
                            drift += f.pair_jet(&jet.gradient, &jet.hessian);
                        }
                        let mut noise_term = 0.0;
                        for (j, f) in step.diffusion.iter().enumerate() {
                            noise_term += f.pair_jet(&jet.gradient, &jet.hessian) * inc[k * d + j];
                        }
                        integral[i] += drift * dt + noise_term;
                    }
                }
            }
            Ok(last.into_iter().zip(sup).collect())
        })
        .collect::<Result<_>>()?;
    let mut terminal = Vec::with_capacity(panel.len());
    let mut stats = Vec::with_capacity(panel.len());
    for i in 0..panel.len() {
        let r: Vec<f64> = per_path.iter().map(|v| v[i].0).collect();
        let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
        let sup: Vec<f64> = per_path.iter().map(|v| v[i].1).collect();
        stats.push(ResidualStats {
            mean_abs: mean_estimate(&abs),
            signed: mean_estimate(&r),
            mean_sup: mean_estimate(&sup),
            n_paths: r.len(),
        });
        terminal.push(r);
    }
    Ok(ResidualLevel {
        dt,
        steps: k_max,
        paths,
        terminal,
        stats,
    })
}

/// Empirical order of `mean |R(T)|` in `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFit {
    /// Weighted least-squares slope of `log₂ mean |R(T)|` against `log₂ dt`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// 95% interval.
    pub ci: (f64, f64),
    /// `log₂` of successive mean ratios, coarse to fine.
    pub halving_orders: Vec<f64>,
}

impl ConvergenceFit {
    pub fn within(&self, low: f64, high: f64) -> bool {
        self.slope >= low && self.slope <= high
    }
}

/// Residual levels for one identity across grids, with per-test-function fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub identity: String,
    pub labels: Vec<String>,
    pub levels: Vec<ResidualLevel>,
    pub fits: Vec<ConvergenceFit>,
}

pub fn residual_report(
    identity: &str,
    labels: Vec<String>,
    mut levels: Vec<ResidualLevel>,
) -> Result<ResidualReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no residual levels".into()));
    }
    levels.sort_by(|a, b| b.dt.total_cmp(&a.dt));
    let count = levels[0].stats.len();
    if labels.len() != count || levels.iter().any(|l| l.stats.len() != count) {
        return Err(Error::ConfigurationMismatch(
            "residual levels use different panels".into(),
        ));
    }
    let fits = (0..count)
        .map(|i| {
            let x: Vec<f64> = levels.iter().map(|l| l.dt.log2()).collect();
            let y: Vec<f64> = levels
                .iter()
                .map(|l| l.stats[i].mean_abs.mean.log2())
                .collect();
            let sigma: Vec<f64> = levels
                .iter()
                .map(|l| {
                    let s = l.stats[i].mean_abs;
                    s.stderr / (s.mean * std::f64::consts::LN_2)
                })
                .collect();
            let halving_orders = levels
                .windows(2)
                .map(|w| {
                    (w[0].stats[i].mean_abs.mean / w[1].stats[i].mean_abs.mean).log2()
                        / (w[0].dt / w[1].dt).log2()
                })
                .collect();
            if levels.len() < 2 {
                return ConvergenceFit {
                    slope: f64::NAN,
                    slope_stderr: f64::NAN,
                    ci: (f64::NAN, f64::NAN),
                    halving_orders,
                };
            }
            let fit = fit_line(&x, &y, Some(&sigma));
            ConvergenceFit {
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
                ci: (
                    fit.slope - 1.96 * fit.slope_stderr,
                    fit.slope + 1.96 * fit.slope_stderr,
                ),
                halving_orders,
            }
        })
        .collect();
    Ok(ResidualReport {
        identity: identity.to_string(),
        labels,
        levels,
        fits,
    })
}

pub const RESIDUAL_SCHEMA: &str = "#schema=residuals/1";
pub const RESIDUAL_PANEL_SCHEMA: &str = "#schema=residual_panel/1";

impl ResidualReport {
    /// `dt,mean_abs_residual,stderr,n_paths` for the test function `index`.
    pub fn csv(&self, index: usize) -> String {
        let mut s = String::new();
        writeln!(s, "{RESIDUAL_SCHEMA}").unwrap();
        writeln!(s, "#identity={}", self.identity).unwrap();
        writeln!(s, "#functional={}", self.labels[index]).unwrap();
        writeln!(s, "dt,mean_abs_residual,stderr,n_paths").unwrap();
        for l in &self.levels {
            let st = &l.stats[index];
            writeln!(
                s,
                "{:?},{:?},{:?},{}",
                l.dt, st.mean_abs.mean, st.mean_abs.stderr, st.n_paths
            )
            .unwrap();
        }
        s
    }

    /// Every test function and statistic.
    pub fn panel_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{RESIDUAL_PANEL_SCHEMA}").unwrap();
        writeln!(s, "#identity={}", self.identity).unwrap();
        writeln!(
            s,
            "functional,dt,mean_abs_residual,stderr,signed_mean,signed_stderr,mean_sup_residual,sup_stderr,n_paths"
        )
        .unwrap();
        for (i, label) in self.labels.iter().enumerate() {
            for l in &self.levels {
                let st = &l.stats[i];
                writeln!(
                    s,
                    "{label},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                    l.dt,
                    st.mean_abs.mean,
                    st.mean_abs.stderr,
                    st.signed.mean,
                    st.signed.stderr,
                    st.mean_sup.mean,
                    st.mean_sup.stderr,
                    st.n_paths
                )
                .unwrap();
            }
        }
        s
    }
}

/// Residual of `X̃ = τ_{Z̃} φ` against `dX = (L + L̂) dt + A·dB`, after
/// confirming that `Z̃` was produced by the modified scheme with `(field, h)`.
pub fn ito_translation_check(
    z: &PathEnsemble,
    phi: &Distribution,
    field: &CoefficientField,
    h: &DriftTable,
    panel: &[PreparedTest],
) -> Result<ResidualLevel> {
    check_modified_configuration(z, field, h)?;
    let lifted = super::lift::lift_solution(z, phi)?;
    spde_residual(&lifted, z, &ModifiedForms { field, h }, panel)
}

const CONFIGURATION_PROBE_PATHS: usize = 4;
const CONFIGURATION_PROBE_STEPS: usize = 8;

/// Replays the first steps of a few paths with `(field, h)`.
pub fn check_modified_configuration(
    z: &PathEnsemble,
    field: &CoefficientField,
    h: &DriftTable,
) -> Result<()> {
    let drift_matches = match (z.scheme(), z.drift()) {
        (Scheme::Modified, Some(stored)) => stored == h,
        (Scheme::Base, None) => h.is_zero(),
        _ => false,
    };
    if !drift_matches {
        return Err(Error::ConfigurationMismatch(
            "ensemble was not simulated with the supplied drift table".into(),
        ));
    }
    let d = z.dimension();
    if field.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: field.dimension(),
        });
    }
    let coeffs = pullback_coeffs(field);
    let dt = z.grid().dt();
    let mut sigma = vec![0.0; d * d];
    let mut drift = vec![0.0; d];
    let mut next = vec![0.0; d];
    for m in z.active_paths().take(CONFIGURATION_PROBE_PATHS) {
        for k in 0..z.grid().steps().min(CONFIGURATION_PROBE_STEPS) {
            let state = z.state(m, k).expect("states present");
            em_step(
                &coeffs,
                Some(h.at(k)),
                state,
                z.increment(m, k),
                dt,
                &mut sigma,
                &mut drift,
                &mut next,
            );
            let stored = z.state(m, k + 1).expect("states present");
            for (a, b) in next.iter().zip(stored) {
                if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
                    return Err(Error::ConfigurationMismatch(format!(
                        "path {m} step {k}: replayed state {a} differs from stored {b}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Paired difference `R_a(T) − R_b(T)` per path and test function.
pub fn paired_difference(a: &ResidualLevel, b: &ResidualLevel) -> Result<Vec<MeanEstimate>> {
    if a.paths != b.paths || a.terminal.len() != b.terminal.len() {
        return Err(Error::ConfigurationMismatch(
            "paired residuals need the same paths and panel".into(),
        ));
    }
    Ok(a.terminal
        .iter()
        .zip(&b.terminal)
        .map(|(x, y)| {
            let diff: Vec<f64> = x.iter().zip(y).map(|(u, v)| u - v).collect();
            mean_estimate(&diff)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::TestFunction;
    use crate::girsanov::transform_bm;
    use crate::sde_engine::{
        sample_brownian, simulate_base, simulate_example2, simulate_modified, TimeGrid,
    };
    use crate::spde_operators::Functional;
    use crate::verifier::lift::lift_solution;

    fn panel(phi: &Distribution) -> Vec<PreparedTest> {
        TestFunction::default_panel(phi.dimension())
            .into_iter()
            .map(|psi| PreparedTest::new(psi, phi, 40).unwrap())
            .collect()
    }

    #[test]
    fn frozen_process_has_zero_residual() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let e = sample_brownian(g, 1, 10, 1).unwrap();
        let frozen = crate::spde_operators::FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |_: &[f64], b: &mut [f64]| b[0] = 0.0,
        );
        let z = simulate_base(&frozen, &[0.0], &e).unwrap();
        let phi = Distribution::delta(vec![0.2]).unwrap();
        let lifted = lift_solution(&z, &phi).unwrap();
        let level = spde_residual(&lifted, &z, &ZeroForms(1), &panel(&phi)).unwrap();
        assert!(level.terminal.iter().flatten().all(|r| *r == 0.0));
        assert!(level.stats.iter().all(|s| s.mean_sup.mean == 0.0));
    }

    #[test]
    fn brownian_residual_shrinks_with_dt() {
        let fine = TimeGrid::new(1.0, 256).unwrap();
        let base = sample_brownian(fine, 1, 2000, 5).unwrap();
        let field = CoefficientField::brownian(1, 0.3).unwrap();
        let phi = field.base().clone();
        let prepared = panel(&phi);
        let mut levels = Vec::new();
        for factor in [8, 4, 2, 1] {
            let e = base.coarsen(factor).unwrap();
            let z = simulate_base(&pullback_coeffs(&field), &[0.0], &e).unwrap();
            let lifted = lift_solution(&z, &phi).unwrap();
            levels.push(
                spde_residual(&lifted, &z, &FieldForms { field: &field }, &prepared).unwrap(),
            );
        }
        let labels = prepared.iter().map(|p| p.function().to_string()).collect();
        let report = residual_report("brownian", labels, levels).unwrap();
        for fit in &report.fits {
            assert!(fit.slope > 0.3, "{fit:?}");
        }
        assert_eq!(report.csv(0).lines().count(), 4 + 4);
        assert!(report.panel_csv().lines().count() > 20);
    }

    #[test]
    fn pure_drift_residual_vanishes() {
        // b̄ ≡ c, σ̄ ≡ 0: ⟨δ_{ct}, ψ⟩ − ψ(0) − Σ c ψ'(c t_k) dt is a Riemann error
        let g = TimeGrid::new(1.0, 64).unwrap();
        let e = sample_brownian(g, 1, 2, 0).unwrap();
        let field = CoefficientField::constant(
            1,
            0.3,
            &[0.0],
            &[0.7],
            Distribution::delta(vec![0.0]).unwrap(),
        )
        .unwrap();
        let z = simulate_base(&pullback_coeffs(&field), &[0.0], &e).unwrap();
        let phi = field.base().clone();
        let lifted = lift_solution(&z, &phi).unwrap();
        let coarse =
            spde_residual(&lifted, &z, &FieldForms { field: &field }, &panel(&phi)).unwrap();
        let e2 = sample_brownian(TimeGrid::new(1.0, 128).unwrap(), 1, 2, 0).unwrap();
        let z2 = simulate_base(&pullback_coeffs(&field), &[0.0], &e2).unwrap();
        let lifted2 = lift_solution(&z2, &phi).unwrap();
        let fine =
            spde_residual(&lifted2, &z2, &FieldForms { field: &field }, &panel(&phi)).unwrap();
        for (a, b) in coarse.stats.iter().zip(&fine.stats) {
            if a.mean_abs.mean > 1e-12 {
                let ratio = a.mean_abs.mean / b.mean_abs.mean;
                assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
            }
        }
    }

    #[test]
    fn zero_drift_reduces_to_plain_residual() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let e = sample_brownian(g, 1, 50, 8).unwrap();
        let field = CoefficientField::brownian(1, 0.3).unwrap();
        let phi = field.base().clone();
        let h = DriftTable::zero(g, 1);
        let z = simulate_modified(&pullback_coeffs(&field), &h, &[0.0], &e).unwrap();
        let prepared = panel(&phi);
        let modified = ito_translation_check(&z, &phi, &field, &h, &prepared).unwrap();
        let lifted = lift_solution(&z, &phi).unwrap();
        let plain = spde_residual(&lifted, &z, &FieldForms { field: &field }, &prepared).unwrap();
        for (a, b) in modified
            .terminal
            .iter()
            .flatten()
            .zip(plain.terminal.iter().flatten())
        {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_configuration_is_rejected() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let e = sample_brownian(g, 1, 5, 3).unwrap();
        let field = CoefficientField::brownian(1, 0.3).unwrap();
        let phi = field.base().clone();
        let h = DriftTable::constant(g, 1, 0.5).unwrap();
        let z = simulate_modified(&pullback_coeffs(&field), &h, &[0.0], &e).unwrap();
        let prepared = panel(&phi);
        let other = DriftTable::constant(g, 1, 0.4).unwrap();
        assert!(matches!(
            ito_translation_check(&z, &phi, &field, &other, &prepared),
            Err(Error::ConfigurationMismatch(_))
        ));
        let doubled = field
            .clone()
            .with_sigma(vec![Functional::Constant(2.0)])
            .unwrap();
        assert!(matches!(
            ito_translation_check(&z, &phi, &doubled, &h, &prepared),
            Err(Error::ConfigurationMismatch(_))
        ));
        assert!(ito_translation_check(&z, &phi, &field, &h, &prepared).is_ok());
    }

    #[test]
    fn girsanov_forms_cancel_pathwise() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let e = sample_brownian(g, 1, 200, 13).unwrap();
        let field = CoefficientField::brownian(1, 0.3).unwrap();
        let phi = field.base().clone();
        let h = DriftTable::from_scalar(
            g,
            1,
            &(0..=32).map(|k| 1.0 - 0.01 * k as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let z = simulate_modified(&pullback_coeffs(&field), &h, &[0.0], &e).unwrap();
        let prepared = panel(&phi);
        let a = ito_translation_check(&z, &phi, &field, &h, &prepared).unwrap();
        let hat = transform_bm(&z, &h).unwrap();
        let lifted = lift_solution(&hat, &phi).unwrap();
        let b = spde_residual(&lifted, &hat, &FieldForms { field: &field }, &prepared).unwrap();
        for d in paired_difference(&a, &b).unwrap() {
            assert!(d.mean.abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn squared_brownian_residual_is_small() {
        let g = TimeGrid::new(1.0, 128).unwrap();
        let e = sample_brownian(g, 1, 500, 2).unwrap();
        let z = simulate_example2(&e).unwrap();
        let phi = Distribution::delta(vec![0.0]).unwrap();
        let lifted = lift_solution(&z, &phi).unwrap();
        let level =
            spde_residual(&lifted, &z, &Example2Forms { ensemble: &z }, &panel(&phi)).unwrap();
        for s in &level.stats {
            assert!(s.mean_abs.mean < 0.2, "{s:?}");
        }
    }
}
