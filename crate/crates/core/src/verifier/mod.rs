//! Numerical checks of the solution claims: lifting `X_t = τ_{Z_t} φ`,
//! weak-form residuals against a test-function panel, the Girsanov-modified
//! identity, the sup-norm moment functionals and weighted law-equality tests.

mod lawtest;
mod lift;
mod residual;
mod sup_norm;

pub use lawtest::{
    law_equality_test, law_test_panel, lawtest_csv, null_rejection_rate, LawTestReport,
    BOOTSTRAP_REPLICATES, LAWTEST_SCHEMA, LAW_TEST_LEVEL,
};
pub use lift::{lift_solution, LiftedPaths, PairingJet, PreparedTest};
pub use residual::{
    check_modified_configuration, ito_translation_check, paired_difference, residual_report,
    spde_residual, ConvergenceFit, Example2Forms, FieldForms, ModifiedForms, PathForms,
    ResidualLevel, ResidualReport, ResidualStats, StepForms, ZeroForms, RESIDUAL_PANEL_SCHEMA,
    RESIDUAL_SCHEMA,
};
pub use sup_norm::{sup_norm_check, SupNormReport};
