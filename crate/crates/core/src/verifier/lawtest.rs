use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const BOOTSTRAP_REPLICATES: usize = 1000;
pub const LAW_TEST_LEVEL: f64 = 0.05;

/// Weighted two-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct LawTestReport {
    pub functional: String,
    /// `sup_x |F_P(x) − G_Q(x)|`.
    pub statistic: f64,
    /// `(1 − level)` bootstrap quantile.
    pub critical: f64,
    pub level: f64,
    pub pass: bool,
    pub ess_p: f64,
    pub ess_q: f64,
}

struct Merged {
    /// Sorted positions; `true` marks a `P` sample.
    order: Vec<(f64, bool, usize)>,
    /// Last index of each tie group.
    group_end: Vec<bool>,
}

fn merge(p: &[f64], q: &[f64]) -> Merged {
    let mut order: Vec<(f64, bool, usize)> = p
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, true, i))
        .chain(q.iter().enumerate().map(|(i, v)| (*v, false, i)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let group_end = (0..order.len())
        .map(|i| i + 1 == order.len() || order[i + 1].0 != order[i].0)
        .collect();
    Merged { order, group_end }
}

/// `sup |F_P − G_Q|` where each sample point carries mass `p_mass[i]` or `q_mass[i]`.
fn sup_distance(m: &Merged, p_mass: &[f64], q_mass: &[f64]) -> f64 {
    let mut gap = 0.0f64;
    let mut best = 0.0f64;
    for (i, (_, is_p, idx)) in m.order.iter().enumerate() {
        if *is_p {
            gap += p_mass[*idx];
        } else {
            gap -= q_mass[*idx];
        }
        if m.group_end[i] {
            best = best.max(gap.abs());
        }
    }
    best
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

fn ess(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    total * total / w.iter().map(|v| v * v).sum::<f64>()
}

/// Compares the unweighted law of `samples_p` with the `weights_q`-weighted
/// law of `samples_q`.
///
/// The critical value is the `(1 − level)` quantile of
/// `sup |(F*_P − F_P) − (G*_Q − G_Q)|` over bootstrap resamples of both
/// sets, where `G*_Q` is renormalized with the resampled weights.
pub fn law_equality_test(
    functional: &str,
    samples_p: &[f64],
    samples_q: &[f64],
    weights_q: &[f64],
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<LawTestReport> {
    if samples_p.is_empty() || samples_q.is_empty() {
        return Err(Error::DegenerateSample("empty sample"));
    }
    if samples_q.len() != weights_q.len() {
        return Err(Error::DimensionMismatch {
            expected: samples_q.len(),
            found: weights_q.len(),
        });
    }
    if samples_p.iter().chain(samples_q).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("law-test sample"));
    }
    if weights_q.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    if !(weights_q.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let first = samples_p[0];
    if samples_p.iter().chain(samples_q).all(|v| *v == first) {
        return Err(Error::DegenerateSample("all samples are equal"));
    }
    if !(level > 0.0 && level < 1.0) || replicates == 0 {
        return Err(Error::InvalidArgument(format!(
            "level {level} and {replicates} replicates"
        )));
    }
    let merged = merge(samples_p, samples_q);
    let np = samples_p.len();
    let nq = samples_q.len();
    let p_mass = vec![1.0 / np as f64; np];
    let q_mass = normalize(weights_q);
    let statistic = sup_distance(&merged, &p_mass, &q_mass);

    let mut replicate_stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut cp = vec![0u32; np];
            for _ in 0..np {
                cp[rng.random_range(0..np)] += 1;
            }
            let mut cq = vec![0u32; nq];
            for _ in 0..nq {
                cq[rng.random_range(0..nq)] += 1;
            }
            let boot_total: f64 = cq.iter().zip(weights_q).map(|(c, w)| *c as f64 * w).sum();
            let dp: Vec<f64> = cp.iter().map(|c| (*c as f64 - 1.0) / np as f64).collect();
            let dq: Vec<f64> = if boot_total > 0.0 {
                cq.iter()
                    .zip(weights_q)
                    .zip(&q_mass)
                    .map(|((c, w), m)| *c as f64 * w / boot_total - m)
                    .collect()
            } else {
                q_mass.iter().map(|m| -m).collect()
            };
            sup_distance(&merged, &dp, &dq)
        })
        .collect();
    replicate_stats.sort_by(f64::total_cmp);
    let rank = ((1.0 - level) * replicates as f64).ceil() as usize;
    let critical = replicate_stats[rank.clamp(1, replicates) - 1];
    Ok(LawTestReport {
        functional: functional.to_string(),
        statistic,
        critical,
        level,
        pass: statistic <= critical,
        ess_p: np as f64,
        ess_q: ess(weights_q),
    })
}

pub const LAWTEST_SCHEMA: &str = "#schema=lawtest/1";

pub fn lawtest_csv(reports: &[LawTestReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{LAWTEST_SCHEMA}").unwrap();
    writeln!(s, "functional,statistic,critical,pass").unwrap();
    for r in reports {
        writeln!(
            s,
            "{},{:?},{:?},{}",
            r.functional, r.statistic, r.critical, r.pass
        )
        .unwrap();
    }
    s
}

/// Runs one test per functional at the Bonferroni level `level / k`.
pub fn law_test_panel(
    functionals: &[(String, Vec<f64>, Vec<f64>)],
    weights_q: &[f64],
    level: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<LawTestReport>> {
    let k = functionals.len().max(1) as f64;
    functionals
        .iter()
        .enumerate()
        .map(|(i, (name, p, q))| {
            law_equality_test(
                name,
                p,
                q,
                weights_q,
                level / k,
                replicates,
                seed.wrapping_add(i as u64),
            )
        })
        .collect()
}

/// Fraction of rejections over `repetitions` null comparisons produced by `sample`,
/// which must return two independent unweighted samples for each repetition.
pub fn null_rejection_rate<F>(
    repetitions: usize,
    level: f64,
    replicates: usize,
    seed: u64,
    sample: F,
) -> Result<f64>
where
    F: Fn(usize) -> (Vec<f64>, Vec<f64>) + Sync,
{
    let rejected = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let (p, q) = sample(r);
            let w = vec![1.0; q.len()];
            law_equality_test(
                "null",
                &p,
                &q,
                &w,
                level,
                replicates,
                seed.wrapping_add(r as u64),
            )
            .map(|rep| !rep.pass)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(rejected.iter().filter(|r| **r).count() as f64 / repetitions as f64)
}
