use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{BufferPartition, ReplayOrder};

/// How buffers are chained and outer loops closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Combine {
    /// Carry the last iterate.
    #[serde(rename = "option1", alias = "I", alias = "option_i")]
    OptionI,
    /// Carry the average of the buffer's post-update iterates; close the
    /// outer loop with the mean of its buffer outputs.
    #[serde(rename = "option2", alias = "II", alias = "option_ii")]
    OptionII,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Bootstrap against the snapshot taken at the start of each outer loop.
    FrozenPerOuterLoop,
    /// Bootstrap against the current iterate.
    Live,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Every outer loop draws new samples.
    Fresh,
    /// Every outer loop replays the same first `N·(B+u)` samples.
    Reuse,
}

/// Everything that determines a learning run apart from the data.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgoConfig {
    pub eta: f64,
    pub gamma: f64,
    /// `K`; for episodic runs the episode budget is `K·N`.
    pub outer_loops: usize,
    /// `N`: buffers per outer loop.
    pub buffers_per_loop: usize,
    /// `B`: transitions used per buffer. Ignored when buffers are episodes.
    pub buffer_size: usize,
    /// `u`: samples discarded after each buffer.
    pub gap: usize,
    pub combine: Combine,
    pub replay_order: ReplayOrder,
    /// Draw random-order positions with replacement instead of permuting.
    pub with_replacement: bool,
    pub target_mode: TargetMode,
    pub data_mode: DataMode,
    /// Starting weights; all zeros when `None`.
    pub init_w: Option<Vec<f64>>,
    /// Buffers are whole episodes.
    pub episodic: bool,
    pub episode_cap: usize,
    /// Checkpoint after every this many buffers.
    pub checkpoint_every: usize,
    /// Maintain the running average of all post-update iterates.
    pub track_average: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            eta: 0.1,
            gamma: 0.9,
            outer_loops: 1,
            buffers_per_loop: 1,
            buffer_size: 1,
            gap: 0,
            combine: Combine::OptionI,
            replay_order: ReplayOrder::Reverse,
            with_replacement: false,
            target_mode: TargetMode::FrozenPerOuterLoop,
            data_mode: DataMode::Fresh,
            init_w: None,
            episodic: false,
            episode_cap: 100_000,
            checkpoint_every: 1,
            track_average: false,
        }
    }
}

impl AlgoConfig {
    /// Q-Rex: frozen target, reverse replay, fresh data.
    pub fn qrex(eta: f64, gamma: f64, k: usize, n: usize, b: usize, u: usize) -> Self {
        AlgoConfig {
            eta,
            gamma,
            outer_loops: k,
            buffers_per_loop: n,
            buffer_size: b,
            gap: u,
            ..Default::default()
        }
    }

    /// Streaming Q-learning over `k·n·b` samples, checkpointed every `b`.
    pub fn vanilla(eta: f64, gamma: f64, k: usize, n: usize, b: usize) -> Self {
        AlgoConfig {
            target_mode: TargetMode::Live,
            replay_order: ReplayOrder::Forward,
            ..Self::qrex(eta, gamma, k, n, b, 0)
        }
    }

    pub fn partition(&self) -> Result<BufferPartition> {
        BufferPartition::new(self.outer_loops, self.buffers_per_loop, self.buffer_size, self.gap)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!(
                "eta = {} must be a non-negative number",
                self.eta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma = {} outside (0, 1]", self.gamma)));
        }
        self.partition()?;
        if self.checkpoint_every == 0 {
            return Err(Error::config("checkpoint_every must be positive"));
        }
        if self.episodic && self.episode_cap == 0 {
            return Err(Error::config("episode_cap must be positive"));
        }
        if self.data_mode == DataMode::Reuse && self.target_mode != TargetMode::FrozenPerOuterLoop {
            return Err(Error::config("data reuse requires a frozen target"));
        }
        if self.data_mode == DataMode::Reuse && self.episodic {
            return Err(Error::config(
                "data reuse is defined for trajectory buffers, not episodes",
            ));
        }
        if let Some(w) = &self.init_w {
            if w.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: w.len(),
                });
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("init_w must be finite"));
            }
        }
        Ok(())
    }

    pub fn initial_weights(&self, dim: usize) -> Vec<f64> {
        self.init_w.clone().unwrap_or_else(|| vec![0.0; dim])
    }
}
