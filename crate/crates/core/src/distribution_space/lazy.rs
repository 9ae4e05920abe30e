use std::sync::Arc;

use crate::error::{Error, Result};

use super::delta::DeltaFamily;
use super::expansion::{translate, HermiteExpansion, Truncated};

/// A distribution held in whichever form keeps translation exact.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Delta(DeltaFamily),
    Expansion(Arc<HermiteExpansion>),
    /// `τ_shift base`, not yet materialized.
    Translated {
        base: Arc<HermiteExpansion>,
        shift: Vec<f64>,
    },
}

impl Distribution {
    pub fn delta(location: Vec<f64>) -> Result<Self> {
        Ok(Self::Delta(DeltaFamily::new(location)?))
    }

    pub fn expansion(u: HermiteExpansion) -> Self {
        Self::Expansion(Arc::new(u))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Delta(d) => d.dimension(),
            Self::Expansion(u) => u.dimension(),
            Self::Translated { base, .. } => base.dimension(),
        }
    }

    pub fn translate(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("translation"));
        }
        Ok(match self {
            Self::Delta(d) => Self::Delta(d.translate(x)?),
            Self::Expansion(u) => Self::Translated {
                base: Arc::clone(u),
                shift: x.to_vec(),
            },
            Self::Translated { base, shift } => Self::Translated {
                base: Arc::clone(base),
                shift: shift.iter().zip(x).map(|(a, b)| a + b).collect(),
            },
        })
    }

    /// Coefficients up to `max_order`.
    pub fn materialize(&self, max_order: usize) -> Result<Truncated<HermiteExpansion>> {
        match self {
            Self::Delta(d) => Ok(Truncated {
                value: d.materialize_order(max_order)?,
                dropped_l2: 0.0,
            }),
            Self::Expansion(u) => Ok(Truncated {
                value: u.resized(max_order)?,
                dropped_l2: 0.0,
            }),
            Self::Translated { base, shift } => {
                let wide = base.resized(max_order.max(base.max_order()))?;
                let moved = translate(&wide, shift)?;
                let value = moved.value.resized(max_order)?;
                Ok(Truncated {
                    value,
                    dropped_l2: moved.dropped_l2,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::{ground_state, norm_p};

    #[test]
    fn delta_translation_stays_exact() {
        let d = Distribution::delta(vec![0.0]).unwrap();
        let moved = d.translate(&[1.25]).unwrap().translate(&[-0.5]).unwrap();
        assert_eq!(moved, Distribution::delta(vec![0.75]).unwrap());
        assert!(d.translate(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn translated_expansion_materializes() {
        let g = Distribution::expansion(ground_state(1, 4).unwrap());
        let moved = g.translate(&[1.0]).unwrap().translate(&[0.5]).unwrap();
        match &moved {
            Distribution::Translated { shift, .. } => assert_eq!(shift, &vec![1.5]),
            other => panic!("{other:?}"),
        }
        let m = moved.materialize(60).unwrap();
        assert!((norm_p(&m.value, 0.0) - 1.0).abs() < 1e-10);
        assert!(m.dropped_l2 < 1e-6);
    }
}
