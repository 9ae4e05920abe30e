use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::CompensatedSum;

use super::grid::{DriftTable, TimeGrid};

/// How the state trajectories of an ensemble were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Increments only.
    Increments,
    /// Euler–Maruyama for `dZ = b̄ dt + σ̄ dB`.
    Base,
    /// Euler–Maruyama with the drift `b̄ − σ̄ h`.
    Modified,
    /// `Z_{k+1} = Z_k + 2 B_k ΔB_k + dt` with `B` carried as auxiliary path.
    Example2,
}

/// `M` paths of Brownian increments on a grid, optionally with states.
///
/// Layouts are path-major: increments `[m][k][j]` (`K × d` per path),
/// states and auxiliary paths `[m][k][j]` (`(K+1) × d` per path).
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: TimeGrid,
    dimension: usize,
    paths: usize,
    seed: u64,
    coarsening: usize,
    increments: Arc<Vec<f64>>,
    states: Option<Arc<Vec<f64>>>,
    auxiliary: Option<Arc<Vec<f64>>>,
    flags: Vec<Option<usize>>,
    scheme: Scheme,
    drift: Option<DriftTable>,
}

/// Increments of path `path` from the stream keyed by `(seed, path)`.
pub fn fill_path_increments(seed: u64, path: usize, dt: f64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    let s = dt.sqrt();
    for v in out.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v = s * g;
    }
}

/// Independent `N(0, dt)` increments for `paths` paths, reproducible from
/// `seed` and independent of thread scheduling.
pub fn sample_brownian(
    grid: TimeGrid,
    dimension: usize,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if dimension == 0 {
        return Err(Error::ZeroDimension);
    }
    if paths == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one path".into(),
        ));
    }
    let per = grid.steps() * dimension;
    let mut increments = vec![0.0; paths * per];
    let dt = grid.dt();
    increments
        .par_chunks_mut(per)
        .enumerate()
        .for_each(|(m, chunk)| fill_path_increments(seed, m, dt, chunk));
    Ok(PathEnsemble::from_parts(
        grid,
        dimension,
        paths,
        seed,
        1,
        Arc::new(increments),
    ))
}

impl PathEnsemble {
    fn from_parts(
        grid: TimeGrid,
        dimension: usize,
        paths: usize,
        seed: u64,
        coarsening: usize,
        increments: Arc<Vec<f64>>,
    ) -> Self {
        Self {
            grid,
            dimension,
            paths,
            seed,
            coarsening,
            increments,
            states: None,
            auxiliary: None,
            flags: vec![None; paths],
            scheme: Scheme::Increments,
            drift: None,
        }
    }

    /// Ensemble from explicit increments, laid out `[m][k][j]`.
    pub fn from_increments(
        grid: TimeGrid,
        dimension: usize,
        increments: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let per = grid.steps() * dimension;
        if dimension == 0
            || per == 0
            || !increments.len().is_multiple_of(per)
            || increments.is_empty()
        {
            return Err(Error::GridMismatch(format!(
                "{} increments do not fill paths of {per} values",
                increments.len()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("increments"));
        }
        let paths = increments.len() / per;
        Ok(Self::from_parts(
            grid,
            dimension,
            paths,
            seed,
            1,
            Arc::new(increments),
        ))
    }

    pub(crate) fn with_states(
        &self,
        states: Vec<f64>,
        auxiliary: Option<Vec<f64>>,
        flags: Vec<Option<usize>>,
        scheme: Scheme,
        drift: Option<DriftTable>,
    ) -> Self {
        Self {
            grid: self.grid,
            dimension: self.dimension,
            paths: self.paths,
            seed: self.seed,
            coarsening: self.coarsening,
            increments: Arc::clone(&self.increments),
            states: Some(Arc::new(states)),
            auxiliary: auxiliary.map(Arc::new),
            flags,
            scheme,
            drift,
        }
    }

    /// Same states with increments replaced (used for `B̂`).
    pub(crate) fn with_increment_values(&self, increments: Vec<f64>) -> Self {
        Self {
            increments: Arc::new(increments),
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of base-grid steps summed into each step of this ensemble.
    pub fn coarsening(&self) -> usize {
        self.coarsening
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Girsanov drift used to generate the states, if any.
    pub fn drift(&self) -> Option<&DriftTable> {
        self.drift.as_ref()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn shares_increments_with(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.increments, &other.increments) || self.increments == other.increments
    }

    pub fn path_increments(&self, path: usize) -> &[f64] {
        let per = self.grid.steps() * self.dimension;
        &self.increments[path * per..(path + 1) * per]
    }

    pub fn increment(&self, path: usize, k: usize) -> &[f64] {
        let d = self.dimension;
        &self.path_increments(path)[k * d..(k + 1) * d]
    }

    pub fn has_states(&self) -> bool {
        self.states.is_some()
    }

    pub fn path_states(&self, path: usize) -> Option<&[f64]> {
        let per = (self.grid.steps() + 1) * self.dimension;
        self.states
            .as_ref()
            .map(|s| &s[path * per..(path + 1) * per])
    }

    pub fn state(&self, path: usize, k: usize) -> Option<&[f64]> {
        let d = self.dimension;
        self.path_states(path).map(|s| &s[k * d..(k + 1) * d])
    }

    pub fn path_auxiliary(&self, path: usize) -> Option<&[f64]> {
        let per = (self.grid.steps() + 1) * self.dimension;
        self.auxiliary
            .as_ref()
            .map(|s| &s[path * per..(path + 1) * per])
    }

    pub fn flag(&self, path: usize) -> Option<usize> {
        self.flags[path]
    }

    pub fn flags(&self) -> &[Option<usize>] {
        &self.flags
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_some()).count()
    }

    pub fn active_paths(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.paths).filter(|m| self.flags[*m].is_none())
    }

    /// `B_{t_k}` for `k = 0..=K`, path-major `(K+1) × d`.
    pub fn brownian_path(&self, path: usize) -> Vec<f64> {
        let d = self.dimension;
        let k_max = self.grid.steps();
        let mut out = vec![0.0; (k_max + 1) * d];
        let inc = self.path_increments(path);
        for k in 0..k_max {
            for j in 0..d {
                out[(k + 1) * d + j] = out[k * d + j] + inc[k * d + j];
            }
        }
        out
    }

    /// `B_T` per path, `[m][j]`.
    pub fn terminal_brownian(&self) -> Vec<f64> {
        let d = self.dimension;
        (0..self.paths)
            .flat_map(|m| {
                let b = self.brownian_path(m);
                b[b.len() - d..].to_vec()
            })
            .collect()
    }

    /// Increments on the grid with `K / factor` steps, obtained by summing
    /// consecutive blocks so the coarse and fine paths coincide at shared times.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let d = self.dimension;
        let fine_per = self.grid.steps() * d;
        let per = grid.steps() * d;
        let mut out = vec![0.0; self.paths * per];
        out.par_chunks_mut(per).enumerate().for_each(|(m, chunk)| {
            let fine = &self.increments[m * fine_per..(m + 1) * fine_per];
            for k in 0..grid.steps() {
                for j in 0..d {
                    let mut s = 0.0;
                    for r in 0..factor {
                        s += fine[(k * factor + r) * d + j];
                    }
                    chunk[k * d + j] = s;
                }
            }
        });
        let mut e = Self::from_parts(
            grid,
            d,
            self.paths,
            self.seed,
            self.coarsening * factor,
            Arc::new(out),
        );
        e.flags = vec![None; self.paths];
        Ok(e)
    }

    /// First `paths` paths.
    pub fn truncate_paths(&self, paths: usize) -> Result<Self> {
        if paths == 0 || paths > self.paths {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {paths} of {} paths",
                self.paths
            )));
        }
        let per_i = self.grid.steps() * self.dimension;
        let per_s = (self.grid.steps() + 1) * self.dimension;
        Ok(Self {
            paths,
            increments: Arc::new(self.increments[..paths * per_i].to_vec()),
            states: self
                .states
                .as_ref()
                .map(|s| Arc::new(s[..paths * per_s].to_vec())),
            auxiliary: self
                .auxiliary
                .as_ref()
                .map(|s| Arc::new(s[..paths * per_s].to_vec())),
            flags: self.flags[..paths].to_vec(),
            ..self.clone()
        })
    }

    /// One row per `(path, k)`: time, state components (the Brownian path
    /// when no states were simulated) and the increment over `[t_k, t_{k+1})`,
    /// empty at `k = K`.
    pub fn to_csv(&self) -> String {
        let d = self.dimension;
        let mut s = String::new();
        s.push_str("#schema=path_ensemble/1\npath,k,t");
        for j in 0..d {
            let _ = write!(s, ",z{}", j + 1);
        }
        for j in 0..d {
            let _ = write!(s, ",db{}", j + 1);
        }
        s.push('\n');
        let k_max = self.grid.steps();
        for m in 0..self.paths {
            let owned;
            let states: &[f64] = match self.path_states(m) {
                Some(st) => st,
                None => {
                    owned = self.brownian_path(m);
                    &owned
                }
            };
            for k in 0..=k_max {
                let _ = write!(s, "{m},{k},{:?}", self.grid.time(k));
                for j in 0..d {
                    let _ = write!(s, ",{:?}", states[k * d + j]);
                }
                for j in 0..d {
                    if k < k_max {
                        let _ = write!(s, ",{:?}", self.increment(m, k)[j]);
                    } else {
                        s.push(',');
                    }
                }
                s.push('\n');
            }
        }
        s
    }

    /// Per-time mean and variance of each state component over active paths.
    pub fn summary_csv(&self) -> String {
        let d = self.dimension;
        let mut s = String::from("#schema=ensemble_summary/1\nt");
        for j in 0..d {
            let _ = write!(s, ",mean{},var{}", j + 1, j + 1);
        }
        s.push('\n');
        let active: Vec<usize> = self.active_paths().collect();
        let paths: Vec<Vec<f64>> = active
            .iter()
            .map(|&m| match self.path_states(m) {
                Some(st) => st.to_vec(),
                None => self.brownian_path(m),
            })
            .collect();
        for k in 0..=self.grid.steps() {
            let _ = write!(s, "{:?}", self.grid.time(k));
            for j in 0..d {
                let mut sum = CompensatedSum::new();
                for p in &paths {
                    sum.add(p[k * d + j]);
                }
                let n = paths.len() as f64;
                let mean = sum.value() / n;
                let mut ss = CompensatedSum::new();
                for p in &paths {
                    ss.add((p[k * d + j] - mean).powi(2));
                }
                let var = if paths.len() > 1 {
                    ss.value() / (n - 1.0)
                } else {
                    0.0
                };
                let _ = write!(s, ",{mean:?},{var:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.summary_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_estimate;

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let a = sample_brownian(g, 2, 50, 9).unwrap();
        let b = sample_brownian(g, 2, 50, 9).unwrap();
        assert_eq!(a.increments(), b.increments());
        let c = sample_brownian(g, 2, 50, 10).unwrap();
        assert_ne!(a.increments(), c.increments());
        // a path does not depend on how many paths are drawn
        let small = sample_brownian(g, 2, 7, 9).unwrap();
        assert_eq!(small.path_increments(6), a.path_increments(6));
    }

    #[test]
    fn increments_have_the_right_law() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let m = 100_000;
        let e = sample_brownian(g, 1, m, 3).unwrap();
        let dt = g.dt();
        let mut worst: f64 = 0.0;
        for k in [0, 37, 99] {
            let vals: Vec<f64> = (0..m).map(|p| e.increment(p, k)[0]).collect();
            let est = mean_estimate(&vals);
            assert!(est.mean.abs() < 5.0 * est.stderr);
            let var = vals.iter().map(|v| v * v).sum::<f64>() / m as f64;
            // Var of the sample second moment is 2 dt² / M
            let z = (var - dt) / (dt * (2.0 / m as f64).sqrt());
            worst = worst.max(z.abs());
        }
        assert!(worst < 5.0, "{worst}");
        let terminal = e.terminal_brownian();
        let var = terminal.iter().map(|v| v * v).sum::<f64>() / m as f64;
        assert!((var - 1.0).abs() < 5.0 * (2.0 / m as f64).sqrt());
    }

    #[test]
    fn coarsening_preserves_terminal_values() {
        let g = TimeGrid::new(2.0, 32).unwrap();
        let e = sample_brownian(g, 2, 5, 1).unwrap();
        let c = e.coarsen(8).unwrap();
        assert_eq!(c.grid().steps(), 4);
        assert_eq!(c.coarsening(), 8);
        for m in 0..5 {
            let fine = e.brownian_path(m);
            let coarse = c.brownian_path(m);
            for j in 0..2 {
                assert!((fine[32 * 2 + j] - coarse[4 * 2 + j]).abs() < 1e-14);
                assert!((fine[8 * 2 + j] - coarse[2 + j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn csv_export_shapes() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let e = PathEnsemble::from_increments(g, 1, vec![0.5, -0.25, 1.0, 1.0], 0).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "path,k,t,z1,db1");
        assert_eq!(lines.len(), 2 + 2 * 3);
        assert_eq!(lines[2], "0,0,0.0,0.0,0.5");
        assert_eq!(lines[4], "0,2,1.0,0.25,");
        assert_eq!(lines[7], "1,2,1.0,2.0,");
        let summary = e.summary_csv();
        assert!(summary.lines().nth(4).unwrap().starts_with("1.0,1.125,"));
        assert!(PathEnsemble::from_increments(g, 1, vec![0.5, 0.1, 0.2], 0).is_err());
    }
}
