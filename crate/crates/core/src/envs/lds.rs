//! Linear dynamical system `X_{t+1} = A·X_t + noise` with reward `⟨X_t, θ⟩`.
//!
//! There is a single action and the embedding is the identity, so
//! Q-learning reduces to TD(0) and `w* = (I − γAᵀ)⁻¹θ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mdp::{Environment, FeatureMap, Phi, TransitionSample};

pub const DEFAULT_DIM: usize = 5;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Lds {
    a: DMatrix<f64>,
    theta: DVector<f64>,
    sigma: f64,
}

impl Lds {
    pub fn new(a: DMatrix<f64>, theta: DVector<f64>, sigma: f64) -> Result<Self> {
        let d = theta.len();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: a.nrows(),
            });
        }
        if !(sigma >= 0.0) {
            return Err(Error::config(format!("noise scale {sigma} must be non-negative")));
        }
        Ok(Lds { a, theta, sigma })
    }

    /// Symmetrised Gaussian `A` rescaled to spectral radius `rho`, and a
    /// uniformly random unit `θ`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rho: f64, sigma: f64, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("LDS dimension must be positive"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::config(format!("spectral radius {rho} must lie in [0, 1)")));
        }
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
        let sym = (&g + g.transpose()) * 0.5;
        let radius = sym
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        let a = if radius > 0.0 { sym * (rho / radius) } else { sym };
        let t = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let theta = &t / t.norm();
        Self::new(a, theta, sigma)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn spectral_radius(&self) -> f64 {
        self.a.complex_eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.norm()))
    }
}

impl FeatureMap for Lds {
    type State = Vec<f64>;

    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn embed(&self, state: &Vec<f64>, _action: usize) -> Phi {
        state.iter().copied().enumerate().collect()
    }
}

impl Environment for Lds {
    fn reset<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<f64> {
        vec![0.0; self.theta.len()]
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Vec<f64>,
        action: usize,
        rng: &mut R,
    ) -> Result<TransitionSample<Vec<f64>>> {
        if action != 0 {
            return Err(Error::InvalidAction { action, num_actions: 1 });
        }
        let d = self.theta.len();
        let reward: f64 = state.iter().zip(self.theta.iter()).map(|(x, t)| x * t).sum();
        let mut next = vec![0.0; d];
        for (i, n) in next.iter_mut().enumerate() {
            let drift: f64 = (0..d).map(|j| self.a[(i, j)] * state[j]).sum();
            let eps: f64 = StandardNormal.sample(rng);
            *n = drift + self.sigma * eps;
        }
        Ok(TransitionSample {
            state: state.clone(),
            action,
            reward,
            next_state: next,
            next_terminal: false,
        })
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("dim".into(), self.theta.len().to_string()),
            ("spectral_radius".into(), format!("{:.6}", self.spectral_radius())),
            ("noise".into(), format!("gaussian({})", self.sigma)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn random_system_is_symmetric_and_stable() {
        let lds = Lds::random(5, 0.9, 0.1, &mut seeded_rng(11)).unwrap();
        let a = lds.a();
        assert!((a - a.transpose()).abs().max() < 1e-15);
        assert!((lds.spectral_radius() - 0.9).abs() < 1e-9);
        assert!((lds.theta().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reset_is_zero_and_reward_is_linear() {
        let lds = Lds::random(5, 0.9, 0.1, &mut seeded_rng(2)).unwrap();
        let mut rng = seeded_rng(0);
        assert_eq!(lds.reset(&mut rng), vec![0.0; 5]);
        let x = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let t = lds.step(&x, 0, &mut rng).unwrap();
        assert_eq!(t.reward, lds.theta()[0]);
    }

    #[test]
    fn noiseless_step_applies_a() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.2]);
        let lds = Lds::new(a, DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        let t = lds.step(&vec![1.0, 2.0], 0, &mut seeded_rng(0)).unwrap();
        assert_eq!(t.next_state, vec![0.7, 0.4]);
    }
}
