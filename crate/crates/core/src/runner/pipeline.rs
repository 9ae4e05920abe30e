use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::distribution_space::{squared_norm_p, Distribution};
use crate::error::{Error, Result};
use crate::girsanov::{
    drift_with_errors, estimate_h, h_table_csv, normalized_weights, novikov_majorant, quadrature_h,
    squared_norm_table, transform_bm, MeasureChange,
};
use crate::sde_engine::{
    sample_brownian, simulate_base, simulate_example2, simulate_modified, DriftTable, PathEnsemble,
    TimeGrid, EXPLOSION_THRESHOLD,
};
use crate::spde_operators::{pullback_coeffs, CoefficientField, Functional};
use crate::verifier::{
    ito_translation_check, law_test_panel, lawtest_csv, lift_solution, paired_difference,
    residual_report, spde_residual, sup_norm_check, Example2Forms, FieldForms, PreparedTest,
    ResidualReport,
};

use super::config::{Identity, ScenarioConfig};

pub const MARTINGALE_SIGMAS: f64 = 3.0;
pub const DRIFT_ORACLE_SIGMAS: f64 = 3.0;
pub const DRIFT_ORACLE_FLOOR: f64 = 1e-12;
pub const RESIDUAL_ORDER_RANGE: (f64, f64) = (0.6, 1.4);
pub const CANCELLATION_SIGMAS: f64 = 2.0;
pub const CANCELLATION_FLOOR: f64 = 1e-12;
pub const SUP_NORM_SIGMAS: f64 = 3.0;
pub const NORM_GRID_HALF_WIDTH: f64 = 10.0;
pub const NORM_GRID_POINTS: usize = 201;

/// One pass/fail line of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Result of a completed pipeline run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            writeln!(
                s,
                "{} {}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )
            .unwrap();
        }
        for d in &self.diagnostics {
            writeln!(s, "INFO {d}").unwrap();
        }
        writeln!(
            s,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        s
    }
}

/// Exit status for an error that stopped a run.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Parse { .. } | Error::Validation { .. } | Error::Io { .. } => 2,
        _ => 1,
    }
}

/// Independent ensemble seeds for the roles of one run.
fn derive_seed(seed: u64, role: u64) -> u64 {
    seed.wrapping_add(role.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const ROLE_DRIFT: u64 = 1;
const ROLE_Q: u64 = 2;
const ROLE_P: u64 = 3;
const ROLE_RESIDUAL: u64 = 4;
const ROLE_BOOTSTRAP: u64 = 5;

struct Writer {
    dir: PathBuf,
}

impl Writer {
    fn put(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
    }
}

/// Whether `X_t = τ_{a+B_t}` with `a` the delta location: identity
/// diffusion, no drift, one dimension.
fn brownian_delta(cfg: &ScenarioConfig, field: &CoefficientField) -> Option<f64> {
    if cfg.identity != Identity::Translation || cfg.dimension != 1 {
        return None;
    }
    let a = match field.base() {
        Distribution::Delta(d) => d.location()[0],
        _ => return None,
    };
    let unit = matches!(field.sigma(0, 0), Functional::Constant(c) if *c == 1.0);
    (unit && field.b(0).is_zero()).then_some(a)
}

struct Simulator<'a> {
    cfg: &'a ScenarioConfig,
    field: &'a CoefficientField,
    z0: Vec<f64>,
}

impl Simulator<'_> {
    fn under_p(&self, e: &PathEnsemble) -> Result<PathEnsemble> {
        match self.cfg.identity {
            Identity::Translation => simulate_base(&pullback_coeffs(self.field), &self.z0, e),
            Identity::SquaredBrownian => simulate_example2(e),
        }
    }

    /// The modified process on the increments of `e`.
    fn modified(&self, e: &PathEnsemble, h: &DriftTable) -> Result<PathEnsemble> {
        match self.cfg.identity {
            Identity::Translation => {
                simulate_modified(&pullback_coeffs(self.field), h, &self.z0, e)
            }
            Identity::SquaredBrownian => simulate_example2(&transform_bm(e, h)?),
        }
    }
}

pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let writer = Writer { dir: out.clone() };
    let d = cfg.dimension;
    let p = cfg.regularity;
    let n = cfg.truncation;
    let field = cfg.field()?;
    let phi = field.base().clone();
    let panel = cfg.panel()?;
    let labels: Vec<String> = panel.iter().map(|f| f.to_string()).collect();
    let prepared: Vec<PreparedTest> = panel
        .into_iter()
        .map(|f| PreparedTest::new(f, &phi, n))
        .collect::<Result<_>>()?;
    let grid = TimeGrid::new(cfg.horizon, cfg.steps)?;
    let sim = Simulator {
        cfg,
        field: &field,
        z0: vec![0.0; d],
    };
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();

    // drift from an auxiliary ensemble under P, frozen from here on
    let aux = sample_brownian(
        grid,
        d,
        cfg.drift_paths(),
        derive_seed(cfg.seed, ROLE_DRIFT),
    )?;
    let z_aux = sim.under_p(&aux)?;
    diagnostics.push(format!(
        "drift ensemble flagged paths: {}",
        z_aux.flagged_count()
    ));
    let norms = squared_norm_table(&z_aux, &phi, -p - 1.0, n)?;
    let h = estimate_h(&norms, z_aux.flags(), &grid, d)?;
    if !h.components_equal() {
        return Err(Error::ConfigurationMismatch(
            "drift components differ".into(),
        ));
    }
    writer.put("h_table.csv", &h_table_csv(&h))?;
    let drift_mass = h.cumulative(grid.steps())[0];
    diagnostics.push(format!("drift integral ∫h ds = {drift_mass:.6}"));

    let oracle_base = brownian_delta(cfg, &field);
    if let Some(a) = oracle_base {
        let points = drift_with_errors(&norms, z_aux.flags(), &grid)?;
        let exact = quadrature_h(&grid, a, p, n)?;
        let mut worst = 0.0f64;
        let pass = points.iter().zip(&exact).all(|(pt, q)| {
            let gap = (pt.h - q).abs();
            if pt.stderr > 0.0 {
                worst = worst.max(gap / pt.stderr);
            }
            gap <= DRIFT_ORACLE_SIGMAS * pt.stderr + DRIFT_ORACLE_FLOOR * q.abs()
        });
        checks.push(Check {
            name: "drift_oracle".into(),
            pass,
            detail: format!("max |h_mc − h_quad| / se = {worst:.3} (≤ {DRIFT_ORACLE_SIGMAS})"),
        });
    }

    let a4 = sup_norm_check(&norms, z_aux.flags(), &grid)?;
    checks.push(Check {
        name: "sup_norm_moment".into(),
        pass: a4.lambda.mean.is_finite() && a4.consistent(),
        detail: format!(
            "lambda = {:.6} ± {:.2e}, H2² = {:.6} at t = {:.4}",
            a4.lambda.mean, a4.lambda.stderr, a4.h2_squared.mean, a4.h2_time
        ),
    });

    // measure change on the Q-side increments
    let bq = sample_brownian(grid, d, cfg.law_paths(), derive_seed(cfg.seed, ROLE_Q))?;
    let mc = MeasureChange::new(&bq, h.clone())?;
    writer.put("weights.csv", &mc.weights_csv())?;
    writer.put("girsanov_summary.csv", &mc.summary_csv())?;
    let mm = mc.martingale_mean();
    checks.push(Check {
        name: "martingale_mean".into(),
        pass: mm.within_sigmas(1.0, MARTINGALE_SIGMAS),
        detail: format!(
            "mean M_T = {:.6} ± {:.2e} (z = {:.3})",
            mm.mean,
            mm.stderr,
            mm.z_score(1.0)
        ),
    });
    let novikov = mc.novikov();
    let mut novikov_pass = novikov.is_finite();
    let mut novikov_detail = format!("exp((d/2)∫h²) = {:.6}", novikov.value);
    if let Some(a) = oracle_base {
        let (majorant, _) = novikov_majorant(&grid, a, p, n)?;
        novikov_pass &= novikov.value <= majorant;
        write!(novikov_detail, " ≤ majorant {majorant:.6}").unwrap();
    }
    checks.push(Check {
        name: "novikov".into(),
        pass: novikov_pass,
        detail: novikov_detail,
    });
    diagnostics.push(format!(
        "effective sample size {:.1} of {}; overflowed weights {}",
        mc.effective_sample_size(),
        cfg.law_paths(),
        mc.overflowed()
    ));

    // law of X_T under P against the weighted modified law
    let bp = sample_brownian(grid, d, cfg.law_paths(), derive_seed(cfg.seed, ROLE_P))?;
    let zp = sim.under_p(&bp)?;
    let zq = sim.modified(&bq, &h)?;
    writer.put("ensemble_summary.csv", &zp.summary_csv())?;
    let terminal = |z: &PathEnsemble, psi: &PreparedTest| -> Result<Vec<f64>> {
        z.active_paths()
            .map(|m| {
                Ok(psi
                    .jet(&phi, z.state(m, grid.steps()).expect("states"))?
                    .value)
            })
            .collect()
    };
    let q_paths: Vec<usize> = zq.active_paths().collect();
    let weights = if cfg.checks.unweighted_law_test {
        vec![1.0; q_paths.len()]
    } else {
        normalized_weights(
            &q_paths
                .iter()
                .map(|&m| mc.log_weights()[m])
                .collect::<Vec<_>>(),
        )
    };
    let functionals = prepared
        .iter()
        .zip(&labels)
        .map(|(psi, label)| Ok((label.clone(), terminal(&zp, psi)?, terminal(&zq, psi)?)))
        .collect::<Result<Vec<_>>>()?;
    let law = law_test_panel(
        &functionals,
        &weights,
        cfg.checks.level,
        cfg.checks.bootstrap_replicates,
        derive_seed(cfg.seed, ROLE_BOOTSTRAP),
    )?;
    writer.put("lawtest.csv", &lawtest_csv(&law))?;
    let rejected: Vec<&str> = law
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.functional.as_str())
        .collect();
    checks.push(Check {
        name: if cfg.checks.unweighted_law_test {
            "law_equality_unweighted"
        } else {
            "law_equality"
        }
        .into(),
        pass: rejected.is_empty(),
        detail: format!(
            "{} of {} functionals within the bootstrap critical value at level {}/{}{}",
            law.len() - rejected.len(),
            law.len(),
            cfg.checks.level,
            law.len(),
            if rejected.is_empty() {
                String::new()
            } else {
                format!("; rejected: {}", rejected.join(" "))
            }
        ),
    });

    // weak-form residuals across grids
    let fine = sample_brownian(
        grid,
        d,
        cfg.residual_paths(),
        derive_seed(cfg.seed, ROLE_RESIDUAL),
    )?;
    let mut base_levels = Vec::new();
    let mut modified_levels = Vec::new();
    let mut hat_levels = Vec::new();
    let mut printed_levels = Vec::new();
    let mut cancellation = Vec::new();
    for steps in cfg.residual_levels() {
        let factor = grid.steps() / steps;
        let e = fine.coarsen(factor)?;
        let hl = h.coarsen(factor)?;
        let z = sim.under_p(&e)?;
        let lifted = lift_solution(&z, &phi)?;
        match cfg.identity {
            Identity::Translation => {
                base_levels.push(spde_residual(
                    &lifted,
                    &e,
                    &FieldForms { field: &field },
                    &prepared,
                )?);
                let zt = sim.modified(&e, &hl)?;
                let modified = ito_translation_check(&zt, &phi, &field, &hl, &prepared)?;
                let hat = transform_bm(&zt, &hl)?;
                let hat_level = spde_residual(
                    &lift_solution(&hat, &phi)?,
                    &hat,
                    &FieldForms { field: &field },
                    &prepared,
                )?;
                cancellation.push((hat.grid().dt(), paired_difference(&modified, &hat_level)?));
                modified_levels.push(modified);
                hat_levels.push(hat_level);
                let printed_noise = transform_bm(&z, &hl)?;
                printed_levels.push(spde_residual(
                    &lifted,
                    &printed_noise,
                    &FieldForms { field: &field },
                    &prepared,
                )?);
            }
            Identity::SquaredBrownian => {
                base_levels.push(spde_residual(
                    &lifted,
                    &e,
                    &Example2Forms { ensemble: &z },
                    &prepared,
                )?);
                let zt = sim.modified(&e, &hl)?;
                let noise = transform_bm(&e, &hl)?;
                hat_levels.push(spde_residual(
                    &lift_solution(&zt, &phi)?,
                    &noise,
                    &Example2Forms { ensemble: &zt },
                    &prepared,
                )?);
            }
        }
    }
    let mut reports: Vec<ResidualReport> = Vec::new();
    for (name, levels) in [
        ("base", base_levels),
        ("modified_B", modified_levels),
        ("modified_Bhat", hat_levels),
        ("printed", printed_levels),
    ] {
        if !levels.is_empty() {
            reports.push(residual_report(name, labels.clone(), levels)?);
        }
    }
    for r in &reports {
        writer.put(&format!("residuals_{}.csv", r.identity), &r.csv(0))?;
        writer.put(
            &format!("residual_panel_{}.csv", r.identity),
            &r.panel_csv(),
        )?;
        let fit = &r.fits[0];
        let orders: Vec<String> = fit
            .halving_orders
            .iter()
            .map(|o| format!("{o:.3}"))
            .collect();
        let line = format!(
            "order {:.3} (95% CI {:.3}..{:.3}; halvings {}) for {}",
            fit.slope,
            fit.ci.0,
            fit.ci.1,
            orders.join(" "),
            r.labels[0]
        );
        let gated = r.identity == "base" || r.identity == "modified_B";
        if gated {
            checks.push(Check {
                name: format!("residual_order_{}", r.identity),
                pass: fit.within(RESIDUAL_ORDER_RANGE.0, RESIDUAL_ORDER_RANGE.1),
                detail: format!(
                    "{line}, required {}..{}",
                    RESIDUAL_ORDER_RANGE.0, RESIDUAL_ORDER_RANGE.1
                ),
            });
        } else {
            diagnostics.push(format!("residual {}: {line}", r.identity));
        }
        diagnostics.push(signed_line(r));
    }
    if !cancellation.is_empty() {
        let mut worst = 0.0f64;
        let pass = cancellation.iter().all(|(_, diffs)| {
            diffs.iter().all(|e| {
                worst = worst.max(e.mean.abs());
                e.mean.abs() <= CANCELLATION_SIGMAS * e.stderr + CANCELLATION_FLOOR
            })
        });
        checks.push(Check {
            name: "girsanov_cancellation".into(),
            pass,
            detail: format!("max |mean(R_(L+L̂,B) − R_(L,B̂))| = {worst:.3e}"),
        });
    }

    writer.put(
        "norms.csv",
        &norms_csv(&phi, p, n, NORM_GRID_HALF_WIDTH, NORM_GRID_POINTS)?,
    )?;
    let outcome = RunOutcome {
        output_dir: out,
        checks,
        diagnostics,
    };
    writer.put("manifest.txt", &manifest(cfg))?;
    writer.put("summary.txt", &outcome.summary())?;
    Ok(outcome)
}

fn signed_line(r: &ResidualReport) -> String {
    let parts: Vec<String> = r
        .levels
        .iter()
        .map(|l| {
            let s = l.stats[0].signed;
            format!("dt={:.5}: {:.3e}±{:.1e}", l.dt, s.mean, s.stderr)
        })
        .collect();
    format!("signed residual mean {} ({})", r.identity, parts.join(", "))
}

pub const NORMS_SCHEMA: &str = "#schema=norms/1";

/// `x,norm` with `‖τ_{x e_1} φ‖_{−p}` on a uniform grid of `[−x_max, x_max]`.
pub fn norms_csv(
    phi: &Distribution,
    p: f64,
    max_order: usize,
    x_max: f64,
    points: usize,
) -> Result<String> {
    if points < 2 || !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "norm grid of {points} points on ±{x_max}"
        )));
    }
    let d = phi.dimension();
    let xs: Vec<f64> = (0..points)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (points - 1) as f64)
        .collect();
    let mut s = String::new();
    writeln!(s, "{NORMS_SCHEMA}").unwrap();
    writeln!(s, "#p={p} truncation={max_order}").unwrap();
    writeln!(s, "x,norm").unwrap();
    for x in xs {
        let mut shift = vec![0.0; d];
        shift[0] = x;
        let norm = match phi.translate(&shift)? {
            Distribution::Delta(delta) => delta.norm(-p, max_order)?.total(),
            moved => squared_norm_p(&moved.materialize(max_order)?.value, -p).sqrt(),
        };
        writeln!(s, "{x:?},{norm:?}").unwrap();
    }
    Ok(s)
}

/// Configuration, version and every tolerance of a run.
pub fn manifest(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    writeln!(s, "spdelab {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "scenario {}", cfg.name).unwrap();
    writeln!(s, "seed {}", cfg.seed).unwrap();
    writeln!(
        s,
        "seed_roles drift={} q={} p={} residual={} bootstrap={}",
        derive_seed(cfg.seed, ROLE_DRIFT),
        derive_seed(cfg.seed, ROLE_Q),
        derive_seed(cfg.seed, ROLE_P),
        derive_seed(cfg.seed, ROLE_RESIDUAL),
        derive_seed(cfg.seed, ROLE_BOOTSTRAP)
    )
    .unwrap();
    writeln!(
        s,
        "paths drift={} law={} residual={}",
        cfg.drift_paths(),
        cfg.law_paths(),
        cfg.residual_paths()
    )
    .unwrap();
    writeln!(s, "residual_levels {:?}", cfg.residual_levels()).unwrap();
    writeln!(s, "[tolerances]").unwrap();
    for (k, v) in [
        ("martingale_mean_sigmas", MARTINGALE_SIGMAS.to_string()),
        ("drift_oracle_sigmas", DRIFT_ORACLE_SIGMAS.to_string()),
        (
            "drift_oracle_relative_floor",
            DRIFT_ORACLE_FLOOR.to_string(),
        ),
        ("residual_order_min", RESIDUAL_ORDER_RANGE.0.to_string()),
        ("residual_order_max", RESIDUAL_ORDER_RANGE.1.to_string()),
        ("cancellation_sigmas", CANCELLATION_SIGMAS.to_string()),
        ("cancellation_floor", CANCELLATION_FLOOR.to_string()),
        ("sup_norm_sigmas", SUP_NORM_SIGMAS.to_string()),
        ("law_test_level", cfg.checks.level.to_string()),
        ("law_test_bonferroni", "level / panel size".to_string()),
        (
            "bootstrap_replicates",
            cfg.checks.bootstrap_replicates.to_string(),
        ),
        ("explosion_threshold", format!("{EXPLOSION_THRESHOLD:e}")),
    ] {
        writeln!(s, "{k} = {v}").unwrap();
    }
    writeln!(s, "[config]").unwrap();
    s.push_str(&cfg.to_toml());
    s
}

/// Writes a preset or configuration as TOML.
pub fn write_config(cfg: &ScenarioConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml()).map_err(|e| Error::io(path, e))
}
