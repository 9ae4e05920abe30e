use proptest::prelude::*;

use spdelab::distribution_space::{norm_p, pair, shared_truncation, HermiteExpansion};
use spdelab::girsanov::{transform_bm, weighted_expectation};
use spdelab::sde_engine::{sample_brownian, DriftTable, TimeGrid};

fn expansion(d: usize, n: usize, coeffs: &[f64]) -> HermiteExpansion {
    let t = shared_truncation(d, n).unwrap();
    let size = t.size();
    let c = coeffs.iter().copied().cycle().take(size).collect();
    HermiteExpansion::new(t, c, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_monotone_in_regularity(
        d in 1usize..=3,
        n in 0usize..=8,
        coeffs in prop::collection::vec(-5.0f64..5.0, 1..40),
        p in -2.0f64..2.0,
        step in 0.0f64..1.5,
    ) {
        let u = expansion(d, n, &coeffs);
        prop_assert!(norm_p(&u, p) <= norm_p(&u, p + step) * (1.0 + 1e-12));
    }

    #[test]
    fn pairing_is_bilinear(
        n in 0usize..=10,
        a in prop::collection::vec(-3.0f64..3.0, 1..20),
        b in prop::collection::vec(-3.0f64..3.0, 1..20),
        c in prop::collection::vec(-3.0f64..3.0, 1..20),
        s in -4.0f64..4.0,
    ) {
        let (u, v, w) = (expansion(2, n, &a), expansion(2, n, &b), expansion(2, n, &c));
        let lhs = pair(&u.add_scaled(&v, s).unwrap(), &w).unwrap();
        let rhs = pair(&u, &w).unwrap() + s * pair(&v, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!((pair(&u, &w).unwrap() - pair(&w, &u).unwrap()).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn basis_offsets_round_trip(d in 1usize..=4, n in 0usize..=10) {
        let t = shared_truncation(d, n).unwrap();
        for off in 0..t.size() {
            prop_assert_eq!(t.offset(t.entries(off)), Some(off));
            prop_assert!(t.order(off) as usize <= n);
        }
        for w in t.orders().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn weighted_expectation_of_a_constant(
        c in -10.0f64..10.0,
        weights in prop::collection::vec(0.01f64..5.0, 1..50),
    ) {
        let values = vec![c; weights.len()];
        let e = weighted_expectation(&values, &weights).unwrap();
        prop_assert!((e.estimate - c).abs() <= 1e-12 * (1.0 + c.abs()));
        let n = weights.len() as f64;
        prop_assert!(e.effective_sample_size <= n * (1.0 + 1e-12) && e.effective_sample_size >= 1.0 - 1e-12);
    }

    #[test]
    fn weighted_expectation_ignores_weight_scale(
        values in prop::collection::vec(-10.0f64..10.0, 2..40),
        raw in prop::collection::vec(0.01f64..5.0, 40),
        scale in 1e-3f64..1e3,
    ) {
        let w: Vec<f64> = raw[..values.len()].to_vec();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let a = weighted_expectation(&values, &w).unwrap();
        let b = weighted_expectation(&values, &scaled).unwrap();
        prop_assert!((a.estimate - b.estimate).abs() <= 1e-10);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.estimate >= lo - 1e-12 && a.estimate <= hi + 1e-12);
    }

    #[test]
    fn transformed_increments_subtract_drift(
        h in 0.0f64..3.0,
        steps in 1usize..=16,
        seed in any::<u64>(),
    ) {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let e = sample_brownian(grid, 2, 5, seed).unwrap();
        let hat = transform_bm(&e, &DriftTable::constant(grid, 2, h).unwrap()).unwrap();
        let dt = grid.dt();
        for (a, b) in e.increments().iter().zip(hat.increments()) {
            prop_assert!((a - h * dt - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn coarsening_keeps_brownian_values(factor_log in 0u32..=3, seed in any::<u64>()) {
        let factor = 1usize << factor_log;
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let fine = sample_brownian(grid, 1, 3, seed).unwrap();
        let coarse = fine.coarsen(factor).unwrap();
        for m in 0..3 {
            let f = fine.brownian_path(m);
            let c = coarse.brownian_path(m);
            for (k, v) in c.iter().enumerate() {
                prop_assert!((v - f[k * factor]).abs() <= 1e-12);
            }
        }
    }
}
