use crate::distribution_space::{
    derivative, second_derivative, shifted_pairing, Distribution, HermiteExpansion, TestFunction,
};
use crate::error::{Error, Result};
use crate::sde_engine::PathEnsemble;

/// `⟨X, ψ⟩`, `⟨∂_i X, ψ⟩` and `⟨∂²_ij X, ψ⟩` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct PairingJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// A test function together with the Hermite expansions of `ψ`, `∂_i ψ`
/// and `∂²_ij ψ` used when the base profile is not a delta.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    psi: TestFunction,
    spectral: Option<Spectral>,
}

#[derive(Debug, Clone)]
struct Spectral {
    value: HermiteExpansion,
    gradient: Vec<HermiteExpansion>,
    hessian: Vec<HermiteExpansion>,
}

impl PreparedTest {
    /// Expansions are built only for non-delta bases.
    pub fn new(psi: TestFunction, phi: &Distribution, max_order: usize) -> Result<Self> {
        if psi.dimension() != phi.dimension() {
            return Err(Error::DimensionMismatch {
                expected: phi.dimension(),
                found: psi.dimension(),
            });
        }
        let spectral = match phi {
            Distribution::Delta(_) => None,
            _ => {
                let d = psi.dimension();
                let wide = psi.expansion(max_order + 2)?;
                let gradient = (0..d)
                    .map(|i| derivative(&wide, i)?.value.resized(max_order))
                    .collect::<Result<Vec<_>>>()?;
                let mut hessian = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        hessian.push(second_derivative(&wide, i, j)?.value.resized(max_order)?);
                    }
                }
                Some(Spectral {
                    value: wide.resized(max_order)?,
                    gradient,
                    hessian,
                })
            }
        };
        Ok(Self { psi, spectral })
    }

    pub fn function(&self) -> &TestFunction {
        &self.psi
    }

    /// Pairing jet of `X = τ_z φ` against `ψ`.
    pub fn jet(&self, phi: &Distribution, z: &[f64]) -> Result<PairingJet> {
        match (phi, &self.spectral) {
            (Distribution::Delta(delta), _) => {
                let x: Vec<f64> = delta.location().iter().zip(z).map(|(a, b)| a + b).collect();
                let j = self.psi.jet(&x)?;
                Ok(PairingJet {
                    value: j.value,
                    gradient: j.gradient.iter().map(|v| -v).collect(),
                    hessian: j.hessian,
                })
            }
            (other, Some(s)) => {
                let (base, shift): (&HermiteExpansion, Vec<f64>) = match other {
                    Distribution::Expansion(u) => (u, z.to_vec()),
                    Distribution::Translated { base, shift } => {
                        (base, shift.iter().zip(z).map(|(a, b)| a + b).collect())
                    }
                    Distribution::Delta(_) => unreachable!(),
                };
                let pair = |g: &HermiteExpansion| shifted_pairing(base, g, &shift);
                Ok(PairingJet {
                    value: pair(&s.value)?,
                    gradient: s
                        .gradient
                        .iter()
                        .map(|g| pair(g).map(|v| -v))
                        .collect::<Result<_>>()?,
                    hessian: s.hessian.iter().map(pair).collect::<Result<_>>()?,
                })
            }
            (_, None) => Err(Error::ConfigurationMismatch(
                "test function was prepared for a delta base".into(),
            )),
        }
    }
}

/// `X_{t_k} = τ_{Z_{t_k}} φ` along every path of an ensemble.
#[derive(Debug, Clone)]
pub struct LiftedPaths<'a> {
    ensemble: &'a PathEnsemble,
    phi: Distribution,
}

pub fn lift_solution<'a>(z: &'a PathEnsemble, phi: &Distribution) -> Result<LiftedPaths<'a>> {
    if !z.has_states() {
        return Err(Error::ConfigurationMismatch(
            "lifting needs simulated states".into(),
        ));
    }
    if phi.dimension() != z.dimension() {
        return Err(Error::DimensionMismatch {
            expected: z.dimension(),
            found: phi.dimension(),
        });
    }
    Ok(LiftedPaths {
        ensemble: z,
        phi: phi.clone(),
    })
}

impl<'a> LiftedPaths<'a> {
    pub fn ensemble(&self) -> &'a PathEnsemble {
        self.ensemble
    }

    pub fn base(&self) -> &Distribution {
        &self.phi
    }

    pub fn shift(&self, path: usize, k: usize) -> &'a [f64] {
        self.ensemble.state(path, k).expect("states present")
    }

    pub fn state(&self, path: usize, k: usize) -> Result<Distribution> {
        self.phi.translate(self.shift(path, k))
    }

    pub fn jet(&self, path: usize, k: usize, psi: &PreparedTest) -> Result<PairingJet> {
        psi.jet(&self.phi, self.shift(path, k))
    }

    /// `⟨X_{t_k}, ψ⟩` through the Hermite expansion of both sides at order `N`.
    pub fn spectral_pairing(
        &self,
        path: usize,
        k: usize,
        psi: &TestFunction,
        max_order: usize,
    ) -> Result<f64> {
        let x = self.state(path, k)?.materialize(max_order)?.value;
        crate::distribution_space::pair(&x, &psi.expansion(max_order)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution_space::ground_state;
    use crate::sde_engine::{sample_brownian, simulate_base, TimeGrid};
    use crate::spde_operators::FnCoefficients;

    #[test]
    fn delta_lift_pairs_to_point_values() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let e = sample_brownian(g, 1, 6, 31).unwrap();
        let unit = FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 1.0,
            |_: &[f64], b: &mut [f64]| b[0] = 0.0,
        );
        let z = simulate_base(&unit, &[0.0], &e).unwrap();
        let phi = Distribution::delta(vec![0.0]).unwrap();
        let lifted = lift_solution(&z, &phi).unwrap();
        assert_eq!(lifted.state(0, 0).unwrap(), phi);
        let psi = TestFunction::gaussian(1, 0.5).unwrap();
        for m in 0..6 {
            for k in 0..=16 {
                let b = z.state(m, k).unwrap()[0];
                if b.abs() > 4.0 {
                    continue;
                }
                let spectral = lifted.spectral_pairing(m, k, &psi, 80).unwrap();
                assert!((spectral - psi.value(&[b]).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pure_drift_moves_the_delta() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let e = sample_brownian(g, 1, 1, 0).unwrap();
        let drift = FnCoefficients::new(
            1,
            |_: &[f64], s: &mut [f64]| s[0] = 0.0,
            |_: &[f64], b: &mut [f64]| b[0] = 1.0,
        );
        let z = simulate_base(&drift, &[0.0], &e).unwrap();
        let lifted = lift_solution(&z, &Distribution::delta(vec![1.0]).unwrap()).unwrap();
        for k in 0..=4 {
            let expect = Distribution::delta(vec![1.0 + g.time(k)]).unwrap();
            match (lifted.state(0, k).unwrap(), expect) {
                (Distribution::Delta(a), Distribution::Delta(b)) => {
                    assert!((a.location()[0] - b.location()[0]).abs() < 1e-15)
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn spectral_jet_matches_delta_limit() {
        // τ_z of a narrow-ish profile against ψ, compared with direct quadrature
        let u = ground_state(1, 40).unwrap();
        let phi = Distribution::expansion(u.clone());
        let psi = TestFunction::gaussian(1, 0.3).unwrap();
        let prepared = PreparedTest::new(psi.clone(), &phi, 60).unwrap();
        let z = [0.7];
        let jet = prepared.jet(&phi, &z).unwrap();
        // ∫ h_0(y − z) ψ(y) dy and its z-derivatives by quadrature
        let n = 4000;
        let (lo, hi) = (-12.0, 12.0);
        let step = (hi - lo) / n as f64;
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for i in 0..=n {
            let y = lo + i as f64 * step;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } * step;
            let base = u.evaluate(&[y - z[0]]).unwrap();
            let j = psi.jet(&[y]).unwrap();
            v += w * base * j.value;
            d1 += w * base * j.gradient[0];
            d2 += w * base * j.hessian[0];
        }
        assert!((jet.value - v).abs() < 1e-9);
        assert!((jet.gradient[0] + d1).abs() < 1e-9);
        assert!((jet.hessian[0] - d2).abs() < 1e-9);
    }
}
