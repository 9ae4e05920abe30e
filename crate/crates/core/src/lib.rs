//! Numerical laboratory for SPDEs in the space of tempered distributions whose
//! solutions are translates `X_t = τ_{Z_t} φ` of a fixed profile.
//!
//! The crate is layered bottom-up:
//!
//! * [`hermite_basis`] – Hermite functions, graded multi-indices, Gauss–Hermite rules.
//! * [`distribution_space`] – truncated Hermite expansions, Hermite–Sobolev
//!   norms, derivatives, translations and Dirac deltas.
//! * [`spde_operators`] – the coefficient functionals `σ_ij`, `b_i`, the operators
//!   `L`, `A_j`, the drift correction `L̂`, and the pulled-back SDE coefficients.
//! * [`sde_engine`] – reproducible Brownian ensembles and Euler–Maruyama paths.
//! * [`girsanov`] – deterministic drift, exponential martingale weights and the
//!   transformed Brownian motion.
//! * [`verifier`] – lifted solutions, weak-form residuals, norm bounds and
//!   weighted two-sample law tests.
//! * [`runner`] – scenario configuration and the end-to-end pipeline.

pub mod distribution_space;
pub mod error;
pub mod girsanov;
pub mod hermite_basis;
pub mod runner;
pub mod sde_engine;
pub mod spde_operators;
pub mod stats;
pub mod verifier;

pub use error::{Error, Result};
