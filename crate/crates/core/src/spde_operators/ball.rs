use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::distribution_space::{
    norm_p, shared_truncation, Distribution, HermiteExpansion, SobolevWeights,
};
use crate::error::{Error, Result};

use super::field::{apply_a, apply_l, CoefficientField};

/// Sampled lower bounds for `sup_{‖y‖_{−p} <= r} ‖L(y)‖_{−p−1} / ‖y‖_{−p}`
/// and the same for each `A_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallBound {
    pub radius: f64,
    pub l_constant: f64,
    pub a_constants: Vec<f64>,
    pub samples: usize,
    pub skipped: usize,
}

/// Draws `samples` points uniformly in direction and radius inside each ball
/// `B_{−p}(0, r)`; the constant reported for `r` is the maximum over all
/// draws from the balls of radius `<= r`, which are subsets of it.
pub fn ball_bound_sweep(
    field: &CoefficientField,
    radii: &[f64],
    samples: usize,
    max_order: usize,
    seed: u64,
) -> Result<Vec<BallBound>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument("ball radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "ball radii must be ascending".into(),
        ));
    }
    let d = field.dimension();
    let p = field.regularity();
    let t = shared_truncation(d, max_order)?;
    let weights = SobolevWeights::new(d, max_order, p);
    let orders = t.orders().to_vec();
    let mut out = Vec::with_capacity(radii.len());
    let mut running_l = 0.0f64;
    let mut running_a = vec![0.0f64; d];
    let mut skipped = 0;
    for (m, &r) in radii.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        for _ in 0..samples {
            // weighted Gaussian direction has ‖·‖_{−p} equal to the plain ℓ² norm of g
            let g: Vec<f64> = (0..t.size()).map(|_| rng.sample(StandardNormal)).collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = r * rng.random::<f64>();
            if gn == 0.0 || radius == 0.0 {
                skipped += 1;
                continue;
            }
            let coeffs: Vec<f64> = g
                .iter()
                .zip(&orders)
                .map(|(v, k)| v / gn * radius / weights.by_order()[*k as usize].sqrt())
                .collect();
            let y = HermiteExpansion::new(t.clone(), coeffs, -p)?;
            let ny = norm_p(&y, -p);
            if ny == 0.0 {
                skipped += 1;
                continue;
            }
            let yd = Distribution::expansion(y);
            let l = apply_l(field, &yd, max_order)?;
            running_l = running_l.max(norm_p(&l.value, -p - 1.0) / ny);
            for (j, ra) in running_a.iter_mut().enumerate() {
                let a = apply_a(field, &yd, j, max_order)?;
                *ra = ra.max(norm_p(&a.value, -p - 1.0) / ny);
            }
        }
        out.push(BallBound {
            radius: r,
            l_constant: running_l,
            a_constants: running_a.clone(),
            samples: samples * (m + 1),
            skipped,
        });
    }
    Ok(out)
}

pub fn ball_bound_check(
    field: &CoefficientField,
    r: f64,
    samples: usize,
    max_order: usize,
    seed: u64,
) -> Result<BallBound> {
    Ok(ball_bound_sweep(field, &[r], samples, max_order, seed)?.remove(0))
}
