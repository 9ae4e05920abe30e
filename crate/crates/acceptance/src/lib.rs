//! Acceptance gate for `spdelab`; the criteria live in `tests/acceptance.rs`
//! and run with `cargo test -p spdelab-acceptance`.
