//! Measure change: the deterministic drift `h`, the exponential martingale
//! `M_T`, the Novikov value, the transformed Brownian motion `B̂ = B − ∫h`
//! and weighted expectations under `Q`.
//!
//! `h` is estimated from an ensemble simulated under `P` and is frozen before
//! any `Q`-side computation.

mod drift;
mod measure;

pub use drift::{
    drift_with_errors, estimate_h, expected_delta_norm_sq, h_table_csv, norm_means,
    novikov_majorant, quadrature_h, squared_norm_table, DriftPoint, H_TABLE_SCHEMA,
};
pub use measure::{
    exponential_martingale, normalized_weights, novikov_estimate, transform_bm,
    weighted_expectation, MeasureChange, NovikovEstimate, WeightedEstimate, SUMMARY_SCHEMA,
    WEIGHTS_SCHEMA,
};
