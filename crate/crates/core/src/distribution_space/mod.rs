//! Tempered distributions as truncated Hermite expansions and the
//! Hermite–Sobolev calculus on them.
//!
//! The norm `‖u‖_p² = Σ_n (2|n| + d)^{2p} ⟨u, h_n⟩²` defines the scale
//! `S_p`; its dual at negative `p` contains the Dirac deltas once `p > d/4`.
//! Axes are zero-based throughout.

mod bounds;
mod delta;
mod expansion;
mod io;
mod lazy;
mod test_function;

pub use bounds::{
    delta_norm_sweep, fit_upper_polynomial, ground_state, translation_bound, DeltaNormSweep,
    PolynomialBound,
};
pub use delta::{delta_expansion, delta_tail, DeltaFamily, NormEstimate};
pub use expansion::{
    derivative, norm_p, pair, second_derivative, shared_truncation, shifted_pairing, sobolev_inner,
    squared_norm_p, translate, translation_matrix, HermiteExpansion, SobolevWeights, Truncated,
};
pub use io::{
    expansion_from_csv, expansion_to_csv, read_expansion, write_expansion, EXPANSION_SCHEMA,
};
pub use lazy::Distribution;
pub use test_function::{Jet, Profile, ProfileJet, TestFunction};
