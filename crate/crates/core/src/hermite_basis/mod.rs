//! Multi-indexed Hermite basis of `L²(R^d)`: graded index sets, stable
//! evaluation of Hermite functions and Gauss–Hermite quadrature.

mod functions;
mod index;
mod quadrature;

pub use functions::{
    hermite_derivative, hermite_eval, hermite_eval_all, hermite_eval_checked, hermite_eval_multi,
    hermite_second_derivative, hermite_values,
};
pub use index::{
    enumerate_indices, enumerate_indices_checked, BasisTruncation, MultiIndex, MAX_BASIS_SIZE,
};
pub use quadrature::{gauss_hermite, quadrature_order_for, QuadratureRule, MAX_QUADRATURE_ORDER};
