//! Experiment configuration: flat TOML keys over per-experiment defaults.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, Combine, DataMode, TargetMode};
use crate::envs::BairdEmbedding;
use crate::error::{Error, Result};
use crate::replay::ReplayOrder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gridworld,
    Randomwalk,
    Mountaincar,
    Baird,
    Lds,
    CustomTabular,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Gridworld,
        ExperimentKind::Randomwalk,
        ExperimentKind::Mountaincar,
        ExperimentKind::Baird,
        ExperimentKind::Lds,
        ExperimentKind::CustomTabular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gridworld => "gridworld",
            ExperimentKind::Randomwalk => "randomwalk",
            ExperimentKind::Mountaincar => "mountaincar",
            ExperimentKind::Baird => "baird",
            ExperimentKind::Lds => "lds",
            ExperimentKind::CustomTabular => "custom-tabular",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Gridworld => {
                "5x5 grid with teleporting states and noisy rewards; sup-norm Q error vs samples"
            }
            ExperimentKind::Randomwalk => {
                "100-state episodic walk with state aggregation; sup-norm Q error vs episodes"
            }
            ExperimentKind::Mountaincar => "tile-coded Mountain Car control; episode length vs episodes",
            ExperimentKind::Baird => "Baird-style counter-example; weight norm vs samples",
            ExperimentKind::Lds => "linear dynamical system value estimation; iterate-averaged L2 error vs samples",
            ExperimentKind::CustomTabular => "tabular model read from model_file; sup-norm Q error vs samples",
        }
    }

    pub fn is_episodic(self) -> bool {
        matches!(self, ExperimentKind::Randomwalk | ExperimentKind::Mountaincar)
    }

    /// Metrics this experiment can report.
    pub fn available_metrics(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Gridworld | ExperimentKind::CustomTabular => &["sup_error", "weight_norm"],
            ExperimentKind::Randomwalk => &["sup_error", "weight_norm", "episode_length", "episode_return"],
            ExperimentKind::Mountaincar => &["episode_length", "episode_return", "weight_norm"],
            ExperimentKind::Baird => &["weight_norm", "sup_error"],
            ExperimentKind::Lds => &["l2_weight_error", "weight_norm"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Qrex,
    Qrexdare,
    Epiqrex,
    Vanilla,
    /// Frozen target, buffers replayed in random order.
    OtlErQ,
    /// Live target, buffers replayed in random order.
    ErQ,
    /// Frozen target, streaming order.
    OtlQ,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Qrex => "qrex",
            AlgorithmKind::Qrexdare => "qrexdare",
            AlgorithmKind::Epiqrex => "epiqrex",
            AlgorithmKind::Vanilla => "vanilla",
            AlgorithmKind::OtlErQ => "otl_er_q",
            AlgorithmKind::ErQ => "er_q",
            AlgorithmKind::OtlQ => "otl_q",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Uniform,
    /// Each episode follows the greedy policy of the weights at its start.
    GreedyOnline,
}

/// A fully resolved experiment. Every field is present after parsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub algorithm: AlgorithmKind,
    pub seeds: usize,
    pub base_seed: u64,
    pub eta: f64,
    pub gamma: f64,
    pub outer_loops: usize,
    pub buffers_per_loop: usize,
    pub buffer_size: usize,
    pub gap: usize,
    pub combine: Combine,
    pub with_replacement: bool,
    /// Every initial weight is set to this value.
    pub init_value: f64,
    pub episode_cap: usize,
    pub checkpoint_every: usize,
    pub track_average: bool,
    pub behavior: Behavior,
    pub metrics: Vec<String>,
    /// Half-width of uniform reward noise (tabular experiments).
    pub reward_noise: f64,
    /// Random walk: non-terminal states and aggregation groups.
    pub states: usize,
    pub groups: usize,
    /// Mountain Car tile coding.
    pub tilings: usize,
    pub tiles: usize,
    pub baird_embedding: BairdEmbedding,
    /// Linear system dimension, spectral radius and noise scale.
    pub lds_dim: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Seed for environment parameters shared by all runs (LDS matrix).
    pub env_seed: u64,
    /// Tabular model file for `custom-tabular`.
    pub model_file: String,
}

const ALIASES: [(&str, &str); 4] = [
    ("K", "outer_loops"),
    ("N", "buffers_per_loop"),
    ("B", "buffer_size"),
    ("u", "gap"),
];

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            algorithm: AlgorithmKind::Qrex,
            seeds: 1,
            base_seed: 0,
            eta: 0.05,
            gamma: 0.9,
            outer_loops: 20,
            buffers_per_loop: 1,
            buffer_size: 3000,
            gap: 0,
            combine: Combine::OptionII,
            with_replacement: false,
            init_value: 0.0,
            episode_cap: 100_000,
            checkpoint_every: 1,
            track_average: false,
            behavior: Behavior::Uniform,
            metrics: kind.available_metrics()[..1].iter().map(|s| s.to_string()).collect(),
            reward_noise: 0.0,
            states: crate::envs::random_walk::DEFAULT_STATES,
            groups: crate::envs::random_walk::DEFAULT_GROUPS,
            tilings: 4,
            tiles: 4,
            baird_embedding: BairdEmbedding::default(),
            lds_dim: 5,
            rho: 0.9,
            sigma: 0.1,
            env_seed: 0,
            model_file: String::new(),
        };
        match kind {
            ExperimentKind::Gridworld => ExperimentConfig {
                outer_loops: 200,
                reward_noise: 0.5,
                ..base
            },
            ExperimentKind::CustomTabular => ExperimentConfig {
                buffer_size: 1000,
                ..base
            },
            ExperimentKind::Randomwalk => ExperimentConfig {
                algorithm: AlgorithmKind::Epiqrex,
                eta: 0.01,
                gamma: 1.0,
                outer_loops: 2000,
                buffer_size: 1,
                checkpoint_every: 20,
                ..base
            },
            ExperimentKind::Mountaincar => ExperimentConfig {
                algorithm: AlgorithmKind::Epiqrex,
                eta: 0.1 / 4.0,
                gamma: 1.0,
                outer_loops: 500,
                buffer_size: 1,
                combine: Combine::OptionI,
                behavior: Behavior::GreedyOnline,
                ..base
            },
            ExperimentKind::Baird => ExperimentConfig {
                algorithm: AlgorithmKind::OtlQ,
                eta: 0.01 / 5f64.sqrt(),
                gamma: 0.99,
                outer_loops: 80,
                buffers_per_loop: 5,
                buffer_size: 50,
                combine: Combine::OptionI,
                init_value: 1.0,
                ..base
            },
            ExperimentKind::Lds => ExperimentConfig {
                eta: 0.01,
                gamma: 0.99,
                outer_loops: 200,
                buffers_per_loop: 5,
                buffer_size: 75,
                gap: 25,
                track_average: true,
                sigma: 1.0,
                env_seed: 1,
                ..base
            },
        }
    }

    /// Parses TOML text; `overrides` are `key=value` pairs applied on top.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override `{item}` is not key=value")))?;
            user.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        for (alias, key) in ALIASES {
            if let Some(v) = user.remove(alias) {
                if user.contains_key(key) {
                    return Err(Error::config(format!("`{alias}` and `{key}` both given")));
                }
                user.insert(key.to_string(), v);
            }
        }
        let kind = match user.get("experiment") {
            Some(v) => ExperimentKind::deserialize(v.clone()).map_err(|e| Error::config(format!("experiment: {e}")))?,
            None => return Err(Error::config("missing key `experiment`")),
        };
        let mut merged = toml::Table::try_from(Self::defaults(kind)).map_err(|e| Error::config(e.to_string()))?;
        merged.extend(user);
        let cfg: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, overrides)
    }

    /// `key = value` lines; [`ExperimentConfig::parse`] reads them back.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        if self.seeds == 0 {
            return Err(Error::config("seeds must be positive"));
        }
        for m in &self.metrics {
            if !kind.available_metrics().contains(&m.as_str()) {
                return Err(Error::config(format!(
                    "metric `{m}` is not reported by {kind}; available: {}",
                    kind.available_metrics().join(", ")
                )));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::config("metrics must not be empty"));
        }
        match self.algorithm {
            AlgorithmKind::Epiqrex if !kind.is_episodic() => {
                return Err(Error::config(format!(
                    "epiqrex needs an episodic experiment, {kind} is continuing"
                )));
            }
            AlgorithmKind::Qrexdare if kind.is_episodic() => {
                return Err(Error::config(format!(
                    "qrexdare reuses trajectory buffers; {kind} is episodic"
                )));
            }
            AlgorithmKind::Qrex if kind.is_episodic() => {
                return Err(Error::config(format!("{kind} is episodic; use epiqrex")));
            }
            _ => {}
        }
        if self.behavior == Behavior::GreedyOnline && !kind.is_episodic() {
            return Err(Error::config("behavior greedy_online needs an episodic experiment"));
        }
        if !(self.reward_noise >= 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::config("noise scales must be non-negative"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!("rho = {} outside (0, 1)", self.rho)));
        }
        if kind == ExperimentKind::Randomwalk && (self.groups == 0 || !self.states.is_multiple_of(self.groups)) {
            return Err(Error::config("groups must divide states"));
        }
        if kind == ExperimentKind::CustomTabular && self.model_file.is_empty() {
            return Err(Error::config("custom-tabular needs model_file"));
        }
        if !self.init_value.is_finite() {
            return Err(Error::config("init_value must be finite"));
        }
        // dimension-independent checks; init weights are sized later
        AlgoConfig {
            init_w: None,
            ..self.algo_config(0)
        }
        .validate(0)
    }

    /// The learning-loop switches implied by the algorithm name.
    pub fn algo_config(&self, dim: usize) -> AlgoConfig {
        let (target_mode, replay_order, data_mode) = match self.algorithm {
            AlgorithmKind::Qrex | AlgorithmKind::Epiqrex => {
                (TargetMode::FrozenPerOuterLoop, ReplayOrder::Reverse, DataMode::Fresh)
            }
            AlgorithmKind::Qrexdare => (TargetMode::FrozenPerOuterLoop, ReplayOrder::Reverse, DataMode::Reuse),
            AlgorithmKind::Vanilla => (TargetMode::Live, ReplayOrder::Forward, DataMode::Fresh),
            AlgorithmKind::OtlErQ => (
                TargetMode::FrozenPerOuterLoop,
                ReplayOrder::UniformRandomPermutation,
                DataMode::Fresh,
            ),
            AlgorithmKind::ErQ => (TargetMode::Live, ReplayOrder::UniformRandomPermutation, DataMode::Fresh),
            AlgorithmKind::OtlQ => (TargetMode::FrozenPerOuterLoop, ReplayOrder::Forward, DataMode::Fresh),
        };
        let streaming = matches!(self.algorithm, AlgorithmKind::Vanilla);
        AlgoConfig {
            eta: self.eta,
            gamma: self.gamma,
            outer_loops: self.outer_loops,
            buffers_per_loop: self.buffers_per_loop,
            buffer_size: self.buffer_size,
            gap: if streaming || self.experiment.is_episodic() {
                0
            } else {
                self.gap
            },
            combine: if streaming { Combine::OptionI } else { self.combine },
            replay_order,
            with_replacement: self.with_replacement,
            target_mode,
            data_mode,
            init_w: Some(vec![self.init_value; dim]),
            episodic: self.experiment.is_episodic(),
            episode_cap: self.episode_cap,
            checkpoint_every: self.checkpoint_every,
            track_average: self.track_average,
        }
    }
}

/// A TOML value, or the raw text as a string when it does not parse.
fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}
