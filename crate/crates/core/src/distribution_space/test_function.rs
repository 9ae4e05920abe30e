use std::fmt;

use crate::error::{Error, Result};
use crate::hermite_basis::{gauss_hermite, hermite_eval_all, hermite_values, quadrature_order_for};

use super::expansion::{shared_truncation, HermiteExpansion};

/// One-dimensional factor of a separable test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `e^{−(x−c)²/(2w²)}`.
    Gaussian { center: f64, width: f64 },
    /// `h_n(x)`.
    Hermite(usize),
}

/// Value, first and second derivative of a profile at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl Profile {
    pub fn jet(&self, x: f64) -> Result<ProfileJet> {
        if !x.is_finite() {
            return Err(Error::NonFinite("test function argument"));
        }
        Ok(match *self {
            Profile::Gaussian { center, width } => {
                let w2 = width * width;
                let r = x - center;
                let value = (-r * r / (2.0 * w2)).exp();
                ProfileJet {
                    value,
                    first: -r / w2 * value,
                    second: (r * r / (w2 * w2) - 1.0 / w2) * value,
                }
            }
            Profile::Hermite(n) => {
                let v = hermite_values(n + 1, x)?;
                let lower = if n > 0 { v[n - 1] } else { 0.0 };
                let nf = n as f64;
                ProfileJet {
                    value: v[n],
                    first: (nf / 2.0).sqrt() * lower - ((nf + 1.0) / 2.0).sqrt() * v[n + 1],
                    second: (x * x - 2.0 * nf - 1.0) * v[n],
                }
            }
        })
    }

    /// `⟨f, h_k⟩` for `k <= max_order`.
    pub fn coefficients(&self, max_order: usize) -> Result<Vec<f64>> {
        match *self {
            Profile::Hermite(n) => {
                let mut c = vec![0.0; max_order + 1];
                if n <= max_order {
                    c[n] = 1.0;
                }
                Ok(c)
            }
            Profile::Gaussian { center, width } => {
                let w2 = width * width;
                // envelope of f·h_k is e^{−α (y − y*)²}
                let alpha = 0.5 + 0.5 / w2;
                let y_star = center / (1.0 + w2);
                let scale = 1.0 / alpha.sqrt();
                let rule = gauss_hermite(quadrature_order_for(max_order))?;
                let mut out = vec![0.0; max_order + 1];
                let mut hv = Vec::with_capacity(max_order + 1);
                for (&node, &w) in rule.nodes().iter().zip(rule.scaled_weights()) {
                    let y = y_star + scale * node;
                    let r = y - center;
                    let f = (-r * r / (2.0 * w2)).exp();
                    let weight = scale * w * f;
                    if weight == 0.0 {
                        continue;
                    }
                    hermite_eval_all(max_order, y, &mut hv)?;
                    for (o, h) in out.iter_mut().zip(&hv) {
                        *o += weight * h;
                    }
                }
                Ok(out)
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Gaussian { center, width } => write!(f, "gaussian({center};{width})"),
            Profile::Hermite(n) => write!(f, "hermite({n})"),
        }
    }
}

/// Separable test function `A Π_i f_i(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    factors: Vec<Profile>,
    amplitude: f64,
}

/// Value, gradient and row-major Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl TestFunction {
    pub fn new(factors: Vec<Profile>, amplitude: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::ZeroDimension);
        }
        for p in &factors {
            if let Profile::Gaussian { center, width } = p {
                if !center.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "gaussian profile needs a finite center and positive width, got {p}"
                    )));
                }
            }
        }
        if !amplitude.is_finite() {
            return Err(Error::NonFinite("test function amplitude"));
        }
        Ok(Self { factors, amplitude })
    }

    /// `e^{−|x−c|²/2}` with the same center on every axis.
    pub fn gaussian(dimension: usize, center: f64) -> Result<Self> {
        Self::new(
            vec![Profile::Gaussian { center, width: 1.0 }; dimension],
            1.0,
        )
    }

    pub fn hermite(n: &[usize]) -> Result<Self> {
        Self::new(n.iter().map(|&k| Profile::Hermite(k)).collect(), 1.0)
    }

    /// Parses `gaussian <center[,center..]> [width] [amplitude]` or
    /// `hermite <n[,n..]>`; scalar arguments are broadcast to all axes.
    pub fn parse(text: &str, dimension: usize) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("test function `{text}`: {m}"));
        let mut parts = text.split_whitespace();
        let kind = parts.next().ok_or_else(|| bad("empty"))?;
        let list = |s: Option<&str>, what: &str| -> Result<Vec<String>> {
            let s = s.ok_or_else(|| bad(&format!("missing {what}")))?;
            let items: Vec<String> = s.split(',').map(str::to_owned).collect();
            match items.len() {
                1 => Ok(vec![items[0].clone(); dimension]),
                n if n == dimension => Ok(items),
                n => Err(bad(&format!("{n} {what} values for dimension {dimension}"))),
            }
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(&format!("`{s}` is not a number")))
        };
        let f = match kind {
            "gaussian" => {
                let centers = list(parts.next(), "center")?;
                let width = parts.next().map(num).transpose()?.unwrap_or(1.0);
                let amplitude = parts.next().map(num).transpose()?.unwrap_or(1.0);
                let factors = centers
                    .iter()
                    .map(|c| {
                        Ok(Profile::Gaussian {
                            center: num(c)?,
                            width,
                        })
                    })
                    .collect::<Result<_>>()?;
                Self::new(factors, amplitude)?
            }
            "hermite" => {
                let orders = list(parts.next(), "order")?;
                let factors = orders
                    .iter()
                    .map(|s| {
                        s.parse::<usize>()
                            .map(Profile::Hermite)
                            .map_err(|_| bad(&format!("`{s}` is not an order")))
                    })
                    .collect::<Result<_>>()?;
                Self::new(factors, 1.0)?
            }
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        if parts.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        Ok(f)
    }

    /// Canonical panel used when a scenario does not list its own.
    pub fn default_panel(dimension: usize) -> Vec<Self> {
        let mut panel = vec![
            Self::gaussian(dimension, 0.0).expect("valid"),
            Self::gaussian(dimension, 0.5).expect("valid"),
            Self::new(
                vec![
                    Profile::Gaussian {
                        center: -1.0,
                        width: 1.5
                    };
                    dimension
                ],
                1.0,
            )
            .expect("valid"),
        ];
        let mut first = vec![0usize; dimension];
        first[0] = 1;
        panel.push(Self::hermite(&first).expect("valid"));
        panel.push(Self::hermite(&vec![2; dimension]).expect("valid"));
        panel
    }

    pub fn dimension(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Profile] {
        &self.factors
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut v = self.amplitude;
        for (p, &xi) in self.factors.iter().zip(x) {
            v *= p.jet(xi)?.value;
        }
        Ok(v)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check(x)?;
        let d = self.dimension();
        let jets: Vec<ProfileJet> = self
            .factors
            .iter()
            .zip(x)
            .map(|(p, &xi)| p.jet(xi))
            .collect::<Result<_>>()?;
        // product of values with up to two factors replaced
        let product_except = |skip: &[usize]| -> f64 {
            jets.iter()
                .enumerate()
                .filter(|(k, _)| !skip.contains(k))
                .map(|(_, j)| j.value)
                .product::<f64>()
                * self.amplitude
        };
        let value = product_except(&[]);
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![0.0; d * d];
        for i in 0..d {
            gradient[i] = jets[i].first * product_except(&[i]);
            for j in 0..d {
                hessian[i * d + j] = if i == j {
                    jets[i].second * product_except(&[i])
                } else {
                    jets[i].first * jets[j].first * product_except(&[i, j])
                };
            }
        }
        Ok(Jet {
            value,
            gradient,
            hessian,
        })
    }

    /// Hermite coefficients up to total order `max_order`.
    pub fn expansion(&self, max_order: usize) -> Result<HermiteExpansion> {
        let t = shared_truncation(self.dimension(), max_order)?;
        let per_axis: Vec<Vec<f64>> = self
            .factors
            .iter()
            .map(|p| p.coefficients(max_order))
            .collect::<Result<_>>()?;
        let coeffs = t
            .iter()
            .map(|entries| {
                entries
                    .iter()
                    .enumerate()
                    .map(|(axis, &e)| per_axis[axis][e as usize])
                    .product::<f64>()
                    * self.amplitude
            })
            .collect();
        HermiteExpansion::new(t, coeffs, 1.0)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitude != 1.0 {
            write!(f, "{}*", self.amplitude)?;
        }
        for (i, p) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}
