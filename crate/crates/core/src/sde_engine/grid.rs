use crate::error::{Error, Result};

/// Uniform grid `t_k = k T / K`, `k = 0..=K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one step".into(),
            ));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Grid with `steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps
            )));
        }
        Self::new(self.horizon, self.steps / factor)
    }
}

/// Deterministic Girsanov drift `h(t_k)`, one `d`-vector per grid time,
/// held piecewise constant on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTable {
    grid: TimeGrid,
    dimension: usize,
    values: Vec<f64>,
    extension: bool,
}

impl DriftTable {
    /// Equal components `h^j(t_k) = scalar[k]` for every `j`.
    pub fn from_scalar(grid: TimeGrid, dimension: usize, scalar: &[f64]) -> Result<Self> {
        if scalar.len() != grid.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "drift table needs {} values, got {}",
                grid.steps() + 1,
                scalar.len()
            )));
        }
        check_values(scalar)?;
        let values = scalar
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, dimension))
            .collect();
        Ok(Self {
            grid,
            dimension,
            values,
            extension: false,
        })
    }

    pub fn constant(grid: TimeGrid, dimension: usize, c: f64) -> Result<Self> {
        Self::from_scalar(grid, dimension, &vec![c; grid.steps() + 1])
    }

    pub fn zero(grid: TimeGrid, dimension: usize) -> Self {
        Self::constant(grid, dimension, 0.0).expect("zero drift is valid")
    }

    /// Per-component values `[k][j]`. Unequal components go beyond the
    /// equal-component drift and mark the table as an extension.
    pub fn with_components(grid: TimeGrid, dimension: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.steps() + 1) * dimension {
            return Err(Error::GridMismatch(format!(
                "drift table needs {} values, got {}",
                (grid.steps() + 1) * dimension,
                values.len()
            )));
        }
        check_values(&values)?;
        let extension = values
            .chunks(dimension)
            .any(|row| row.iter().any(|v| *v != row[0]));
        Ok(Self {
            grid,
            dimension,
            values,
            extension,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dimension..(k + 1) * self.dimension]
    }

    /// First component at every grid time.
    pub fn scalar(&self) -> Vec<f64> {
        self.values
            .iter()
            .step_by(self.dimension)
            .copied()
            .collect()
    }

    pub fn is_extension(&self) -> bool {
        self.extension
    }

    pub fn components_equal(&self) -> bool {
        !self.extension
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// `Σ_k |h(t_k)|² dt` over `k < K`.
    pub fn integral_of_square(&self) -> f64 {
        let dt = self.grid.dt();
        (0..self.grid.steps())
            .map(|k| self.at(k).iter().map(|v| v * v).sum::<f64>() * dt)
            .sum()
    }

    /// `∫_0^{t_k} h ds` with left-point quadrature, per component.
    pub fn cumulative(&self, k: usize) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut acc = vec![0.0; self.dimension];
        for step in 0..k {
            for (a, v) in acc.iter_mut().zip(self.at(step)) {
                *a += v * dt;
            }
        }
        acc
    }

    /// Samples the table at the times of a grid that it refines.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let values = (0..=grid.steps())
            .flat_map(|k| self.at(k * factor).to_vec())
            .collect();
        Ok(Self {
            grid,
            dimension: self.dimension,
            values,
            extension: self.extension,
        })
    }

    /// Same table on a grid whose times it contains.
    pub fn restrict_to(&self, grid: &TimeGrid) -> Result<Self> {
        if grid.horizon() != self.grid.horizon() || !self.grid.steps().is_multiple_of(grid.steps())
        {
            return Err(Error::GridMismatch(format!(
                "drift grid (T={}, K={}) does not refine (T={}, K={})",
                self.grid.horizon(),
                self.grid.steps(),
                grid.horizon(),
                grid.steps()
            )));
        }
        self.coarsen(self.grid.steps() / grid.steps())
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "drift values must be finite and non-negative, found {v}"
        )));
    }
    Ok(())
}
