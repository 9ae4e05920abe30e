//! Coefficient functionals `σ_ij`, `b_i` acting on `S_{−p}`, the operators
//!
//! `L(y) = ½ Σ_ij (σσᵗ)_ij(y) ∂²_ij y − Σ_i b_i(y) ∂_i y`,
//! `A_j(y) = −Σ_i σ_ij(y) ∂_i y`,
//! `L̂(y) = −Σ_j h_j A_j(y)`,
//!
//! and the SDE coefficients obtained by pulling them back along translates
//! of the base profile.

mod ball;
mod field;
mod functional;
mod pullback;

pub use ball::{ball_bound_check, ball_bound_sweep, BallBound};
pub use field::{
    apply_a, apply_l, apply_l_hat, combine_a, form_a, form_l, form_l_hat, CoefficientField,
    DifferentialForm,
};
pub use functional::{
    constant_surrogate, hermite_integrals, integral, Functional, SmoothCoefficient,
    SMOOTH_PAIRING_ORDER,
};
pub use pullback::{
    local_lipschitz, pullback_coeffs, FnCoefficients, LipschitzEstimate, Pullback, SdeCoefficients,
};
