//! Seven-state Baird counter-example with synchronous-style sampling.
//!
//! Every transition goes to the last state with reward 0, so `w* = 0`.
//! Each step draws its source state uniformly at random instead of
//! following the chain.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Environment, FeatureMap, Phi, TabularModel, TransitionSample};

pub const NUM_STATES: usize = 7;
const LAST: usize = NUM_STATES - 1;

/// Feature layout in ℝ⁷ (states 0‥5 are the upper states, 6 the lower one).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BairdEmbedding {
    /// `φ(i) = 2e_i + e_7`, `φ(7) = 2e_7`. Vanilla Q-learning diverges.
    #[default]
    LocalTwoSharedOne,
    /// `φ(i) = e_i + 2e_7`, `φ(7) = 2e_7`. Every eigenvalue of the expected
    /// update matrix is positive, so this one converges, slowly.
    LocalOneSharedTwo,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Baird {
    embedding: BairdEmbedding,
}

impl Baird {
    pub fn new(embedding: BairdEmbedding) -> Self {
        Baird { embedding }
    }

    pub fn embedding(&self) -> BairdEmbedding {
        self.embedding
    }

    /// Chain model (γ given by the caller); rewards are identically 0.
    pub fn model(gamma: f64) -> TabularModel {
        let mut p = vec![0.0; NUM_STATES * NUM_STATES];
        for s in 0..NUM_STATES {
            p[s * NUM_STATES + LAST] = 1.0;
        }
        TabularModel::new(NUM_STATES, 1, p, vec![0.0; NUM_STATES], gamma).expect("baird model is valid")
    }
}

impl FeatureMap for Baird {
    type State = usize;

    fn dim(&self) -> usize {
        NUM_STATES
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn embed(&self, state: &usize, _action: usize) -> Phi {
        let (local, shared) = match self.embedding {
            BairdEmbedding::LocalTwoSharedOne => (2.0, 1.0),
            BairdEmbedding::LocalOneSharedTwo => (1.0, 2.0),
        };
        if *state == LAST {
            smallvec::smallvec![(LAST, 2.0)]
        } else {
            smallvec::smallvec![(*state, local), (LAST, shared)]
        }
    }
}

impl Environment for Baird {
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..NUM_STATES)
    }

    fn step<R: Rng + ?Sized>(&self, state: &usize, action: usize, _rng: &mut R) -> Result<TransitionSample<usize>> {
        if action != 0 {
            return Err(Error::InvalidAction { action, num_actions: 1 });
        }
        Ok(TransitionSample {
            state: *state,
            action,
            reward: 0.0,
            next_state: LAST,
            next_terminal: false,
        })
    }

    fn continue_from<R: Rng + ?Sized>(&self, _sample: &TransitionSample<usize>, rng: &mut R) -> usize {
        rng.random_range(0..NUM_STATES)
    }

    fn state_index(&self, state: &usize) -> Option<usize> {
        Some(*state)
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![("embedding".into(), format!("{:?}", self.embedding))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::dot;

    #[test]
    fn embedding_table() {
        let env = Baird::default();
        assert_eq!(env.embed(&2, 0).as_slice(), &[(2, 2.0), (6, 1.0)]);
        assert_eq!(env.embed(&6, 0).as_slice(), &[(6, 2.0)]);
        let alt = Baird::new(BairdEmbedding::LocalOneSharedTwo);
        assert_eq!(alt.embed(&2, 0).as_slice(), &[(2, 1.0), (6, 2.0)]);
    }

    #[test]
    fn max_feature_norm_is_sqrt5_and_wstar_is_zero() {
        for env in [Baird::default(), Baird::new(BairdEmbedding::LocalOneSharedTwo)] {
            let max = (0..NUM_STATES)
                .map(|s| env.embed(&s, 0).iter().map(|(_, v)| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            assert!((max - 5f64.sqrt()).abs() < 1e-15);
            for s in 0..NUM_STATES {
                assert_eq!(dot(&[0.0; NUM_STATES], &env.embed(&s, 0)), 0.0);
            }
        }
    }

    /// Expected vanilla update `E_s[(γ⟨φ(7), w⟩ − ⟨φ(s), w⟩) φ(s)]` over uniform `s`.
    fn expected_update(env: &Baird, w: &[f64], gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; NUM_STATES];
        let boot = gamma * dot(w, &env.embed(&LAST, 0));
        for s in 0..NUM_STATES {
            let phi = env.embed(&s, 0);
            let td = boot - dot(w, &phi);
            for &(i, v) in &phi {
                out[i] += td * v / NUM_STATES as f64;
            }
        }
        out
    }

    #[test]
    fn expected_update_grows_shared_weight() {
        let env = Baird::default();
        for c in [0.1, 1.0, 7.0] {
            let mut w = vec![0.0; NUM_STATES];
            w[LAST] = c;
            assert!(expected_update(&env, &w, 0.99)[LAST] > 0.0);
        }
        // the alternative layout shrinks it instead
        let alt = Baird::new(BairdEmbedding::LocalOneSharedTwo);
        let mut w = vec![0.0; NUM_STATES];
        w[LAST] = 1.0;
        assert!(expected_update(&alt, &w, 0.99)[LAST] < 0.0);
    }
}
