use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Environment, FeatureMap, Phi, TabularModel, TransitionSample};

/// Additive or resampled reward noise around `R(s, a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RewardNoise {
    None,
    /// `R(s, a) + U[−h, h]`.
    Uniform {
        half_width: f64,
    },
    /// Reward 1 with probability `R(s, a)`, else 0. Requires `R ∈ [0, 1]`.
    Bernoulli,
}

/// Embedding of a finite state space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TabularFeatures {
    /// `e_{(s, a)}`, dimension `S·A`.
    OneHot,
    /// One-hot over `(group, action)` where states `first, first+1, …` are
    /// grouped `group_size` at a time.
    Aggregated {
        first_state: usize,
        group_size: usize,
        groups: usize,
    },
}

/// A simulator backed by an explicit [`TabularModel`].
#[derive(Clone, Debug)]
pub struct TabularEnv {
    model: TabularModel,
    noise: RewardNoise,
    features: TabularFeatures,
    starts: Vec<usize>,
    terminal: Vec<bool>,
}

impl TabularEnv {
    /// Continuing env, one-hot features, noiseless rewards, uniform start.
    pub fn new(model: TabularModel) -> Self {
        let n = model.num_states();
        TabularEnv {
            model,
            noise: RewardNoise::None,
            features: TabularFeatures::OneHot,
            starts: (0..n).collect(),
            terminal: vec![false; n],
        }
    }

    pub fn with_noise(mut self, noise: RewardNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_features(mut self, features: TabularFeatures) -> Self {
        self.features = features;
        self
    }

    /// Start states, drawn uniformly on reset.
    pub fn with_starts(mut self, starts: Vec<usize>) -> Self {
        assert!(!starts.is_empty(), "at least one start state");
        self.starts = starts;
        self
    }

    pub fn with_terminals(mut self, terminals: &[usize]) -> Self {
        for &t in terminals {
            self.terminal[t] = true;
        }
        self
    }

    pub fn model(&self) -> &TabularModel {
        &self.model
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn features(&self) -> TabularFeatures {
        self.features
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    /// Every non-terminal `(state, action)` pair.
    pub fn eval_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.model.num_states())
            .filter(|&s| !self.terminal[s])
            .flat_map(|s| (0..self.model.num_actions()).map(move |a| (s, a)))
            .collect()
    }
}

impl FeatureMap for TabularEnv {
    type State = usize;

    fn dim(&self) -> usize {
        match self.features {
            TabularFeatures::OneHot => self.model.num_states() * self.model.num_actions(),
            TabularFeatures::Aggregated { groups, .. } => groups * self.model.num_actions(),
        }
    }

    fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    fn embed(&self, state: &usize, action: usize) -> Phi {
        let idx = match self.features {
            TabularFeatures::OneHot => self.model.sa_index(*state, action),
            TabularFeatures::Aggregated {
                first_state,
                group_size,
                groups,
            } => {
                let g = ((state - first_state) / group_size).min(groups - 1);
                g * self.model.num_actions() + action
            }
        };
        smallvec::smallvec![(idx, 1.0)]
    }
}

impl Environment for TabularEnv {
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.starts[rng.random_range(0..self.starts.len())]
    }

    fn step<R: Rng + ?Sized>(&self, state: &usize, action: usize, rng: &mut R) -> Result<TransitionSample<usize>> {
        let s = *state;
        if action >= self.model.num_actions() {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.model.num_actions(),
            });
        }
        let next = self.model.sample_next(s, action, rng);
        let mean = self.model.reward(s, action);
        let reward = match self.noise {
            RewardNoise::None => mean,
            RewardNoise::Uniform { half_width } => mean + rng.random_range(-half_width..=half_width),
            RewardNoise::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Ok(TransitionSample {
            state: s,
            action,
            reward,
            next_state: next,
            next_terminal: self.terminal[next],
        })
    }

    fn is_episodic(&self) -> bool {
        self.terminal.iter().any(|&t| t)
    }

    fn state_index(&self, state: &usize) -> Option<usize> {
        Some(*state)
    }

    fn describe(&self) -> Vec<(String, String)> {
        let noise = match self.noise {
            RewardNoise::None => "none".to_string(),
            RewardNoise::Uniform { half_width } => format!("uniform({half_width})"),
            RewardNoise::Bernoulli => "bernoulli".to_string(),
        };
        vec![
            ("states".into(), self.model.num_states().to_string()),
            ("actions".into(), self.model.num_actions().to_string()),
            ("reward_noise".into(), noise),
        ]
    }
}
