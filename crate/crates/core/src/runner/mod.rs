//! Scenario files, built-in presets and the end-to-end pipeline:
//! simulate under `P`, estimate and freeze `h`, check the measure change,
//! simulate the modified process, then run residual and law tests.
//!
//! Scenario files are TOML. Top-level keys: `name`, `identity`
//! (`translation` or `squared_brownian`), `dimension`, `regularity`,
//! `truncation`, `horizon`, `steps`, `paths`, `seed`, `base`, optional
//! `output`. Sections: `[coefficients]` with `sigma` (row-major) and `drift`
//! lists of functional specs, `[panel]` with `functions`, and `[checks]`.
//! Unknown keys are rejected.

mod config;
mod pipeline;
mod selftest;

pub use config::{
    load_config, parse_config, preset, CheckConfig, CoefficientConfig, Identity, Overrides,
    PanelConfig, ScenarioConfig, MAX_PATHS, MAX_STEPS, MAX_TRUNCATION, PRESETS,
};
pub use pipeline::{
    exit_code_for, manifest, norms_csv, run_pipeline, write_config, Check, RunOutcome,
    CANCELLATION_FLOOR, CANCELLATION_SIGMAS, DRIFT_ORACLE_FLOOR, DRIFT_ORACLE_SIGMAS,
    MARTINGALE_SIGMAS, NORMS_SCHEMA, NORM_GRID_HALF_WIDTH, NORM_GRID_POINTS, RESIDUAL_ORDER_RANGE,
    SUP_NORM_SIGMAS,
};
pub use selftest::selftest;
