//! Small deterministic reductions shared by the estimators.
//!
//! Every reduction walks its input in index order, so results do not depend
//! on how the per-path values were produced.

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Distance from `target` measured in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = self.mean - target;
        if self.stderr > 0.0 {
            gap / self.stderr
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        }
    }

    pub fn within_sigmas(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target).abs() <= sigmas
    }
}

pub fn mean_estimate(values: &[f64]) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let var = if n > 1 {
        compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        count: n,
    }
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
}

/// Least-squares line through `(x, y)` with the standard error of the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Weighted least squares; `sigma[i]` is the standard error of `y[i]`.
/// Zero or missing errors fall back to unit weights.
pub fn fit_line(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> LineFit {
    assert_eq!(x.len(), y.len());
    let w: Vec<f64> = match sigma {
        Some(s) if s.iter().all(|v| *v > 0.0 && v.is_finite()) => {
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        _ => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = match sigma {
        Some(_) => (1.0 / sxx).sqrt(),
        None => {
            let n = x.len();
            if n > 2 {
                let rss: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, c)| {
                        let r = c - (intercept + slope * a);
                        r * r
                    })
                    .sum();
                (rss / (n - 2) as f64 / sxx).sqrt()
            } else {
                0.0
            }
        }
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
    }

    #[test]
    fn mean_and_stderr() {
        let e = mean_estimate(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let var = (2.25 + 0.25 + 0.25 + 2.25) / 3.0;
        assert!((e.stderr - (var / 4.0f64).sqrt()).abs() < 1e-15);
        assert!(e.within_sigmas(2.5, 0.0));
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = fit_line(&x, &y, None);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-10);
    }
}
