//! Reproducible Brownian ensembles and Euler–Maruyama paths for the
//! translation SDE `dZ = b̄(Z) dt + σ̄(Z) dB`, its Girsanov-modified form and
//! the squared-Brownian example.

mod ensemble;
mod grid;
mod simulate;

pub use ensemble::{fill_path_increments, sample_brownian, PathEnsemble, Scheme};
pub use grid::{DriftTable, TimeGrid};
pub use simulate::{
    em_step, example2_terminal_error, realized_quadratic_variation, simulate_base,
    simulate_example2, simulate_modified, EXPLOSION_THRESHOLD,
};
