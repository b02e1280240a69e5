use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{greedy_action, BehaviorPolicy, Environment, FeatureMap, TrajectoryStream, TransitionSample};
use crate::replay::{iteration_order, sample_with_replacement, ReplayOrder};

use super::combine_iterates;
use super::config::{AlgoConfig, Combine, DataMode, TargetMode};
use super::pass::{apply_updates, PassContext, RunningMean};

/// Named scalar metrics recorded at a checkpoint.
pub type Metrics = BTreeMap<&'static str, f64>;

/// Maps the reported weight vector to extra metrics.
pub type Evaluator<'a> = &'a dyn Fn(&[f64]) -> Vec<(&'static str, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Environment samples consumed so far, gaps included.
    pub samples: u64,
    /// Episodes completed so far (episodic runs only).
    pub episodes: u64,
    pub w: Vec<f64>,
    /// Running average of all post-update iterates, when tracked.
    pub avg_w: Option<Vec<f64>>,
    pub metrics: Metrics,
}

/// Everything a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub final_w: Vec<f64>,
    pub diverged: bool,
    pub samples_consumed: u64,
    pub updates: u64,
    pub episodes: u64,
    pub skipped_episodes: u64,
    pub truncated_episodes: u64,
}

/// One update about to be applied.
pub struct UpdateEvent<'a, S> {
    pub outer: usize,
    pub buffer: usize,
    /// 0-based index of the update within the buffer pass.
    pub step: usize,
    /// 1-based buffer position being consumed.
    pub position: usize,
    pub sample: &'a TransitionSample<S>,
    /// Weights the bootstrap term reads.
    pub bootstrap_w: &'a [f64],
}

/// Instrumentation hooks. Indices `outer` and `buffer` are 0-based.
pub trait Observer<S> {
    fn outer_start(&mut self, _outer: usize, _w: &[f64]) {}
    /// A buffer is about to be replayed; `order` holds 1-based positions.
    fn buffer(&mut self, _outer: usize, _buffer: usize, _samples: &[TransitionSample<S>], _order: &[usize]) {}
    fn before_update(&mut self, _event: &UpdateEvent<'_, S>) {}
    fn after_update(&mut self, _outer: usize, _buffer: usize, _step: usize, _w: &[f64]) {}
    fn outer_end(&mut self, _outer: usize, _w: &[f64]) {}
}

impl<S> Observer<S> for () {}

/// Where the data for a run comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataPolicy {
    /// A fixed behaviour policy.
    Behavior(BehaviorPolicy),
    /// Episode `k` is generated greedily from the weights at the end of
    /// episode `k − 1` (episodic runs only).
    GreedyOnline,
}

struct Batch<S> {
    samples: Vec<TransitionSample<S>>,
    consumed: u64,
    truncated: bool,
}

trait BatchSource<S> {
    fn next_batch<R: Rng + ?Sized>(&mut self, w: &[f64], rng: &mut R) -> Result<Batch<S>>;
    fn is_episodic(&self) -> bool {
        false
    }
}

/// Consecutive slices of one trajectory: `B` used samples then `u` skipped.
struct StreamSource<'a, E: Environment> {
    stream: TrajectoryStream<'a, E>,
    used: usize,
    gap: usize,
}

impl<E: Environment> BatchSource<E::State> for StreamSource<'_, E> {
    fn next_batch<R: Rng + ?Sized>(&mut self, _w: &[f64], rng: &mut R) -> Result<Batch<E::State>> {
        let mut samples = Vec::with_capacity(self.used);
        for _ in 0..self.used {
            samples.push(self.stream.next_sample(rng)?);
        }
        for _ in 0..self.gap {
            self.stream.next_sample(rng)?;
        }
        Ok(Batch {
            samples,
            consumed: (self.used + self.gap) as u64,
            truncated: false,
        })
    }
}

/// Buffer `j` of every outer loop is slice `j` of a fixed dataset.
struct DatasetSource<'a, S> {
    data: &'a [TransitionSample<S>],
    used: usize,
    stride: usize,
    buffers: usize,
    cursor: usize,
}

impl<S: Clone> BatchSource<S> for DatasetSource<'_, S> {
    fn next_batch<R: Rng + ?Sized>(&mut self, _w: &[f64], _rng: &mut R) -> Result<Batch<S>> {
        let j = self.cursor % self.buffers;
        self.cursor += 1;
        let start = j * self.stride;
        Ok(Batch {
            samples: self.data[start..start + self.used].to_vec(),
            // fresh samples are only drawn during the first outer loop
            consumed: if self.cursor <= self.buffers {
                self.stride as u64
            } else {
                0
            },
            truncated: false,
        })
    }
}

/// One episode per buffer.
struct EpisodeSource<'a, E: Environment> {
    env: &'a E,
    policy: DataPolicy,
    cap: usize,
}

impl<E: Environment> BatchSource<E::State> for EpisodeSource<'_, E> {
    fn next_batch<R: Rng + ?Sized>(&mut self, w: &[f64], rng: &mut R) -> Result<Batch<E::State>> {
        let mut state = self.env.reset(rng);
        let mut samples = Vec::new();
        loop {
            let action = match &self.policy {
                DataPolicy::Behavior(p) => p.act(self.env, &state, rng),
                DataPolicy::GreedyOnline => greedy_action(w, self.env, &state),
            };
            let sample = self.env.step(&state, action, rng)?;
            let done = sample.next_terminal;
            state = sample.next_state.clone();
            samples.push(sample);
            if done || samples.len() >= self.cap {
                let consumed = samples.len() as u64;
                return Ok(Batch {
                    samples,
                    consumed,
                    truncated: !done,
                });
            }
        }
    }

    fn is_episodic(&self) -> bool {
        true
    }
}

fn run_loops<F, Src, O, R>(
    cfg: &AlgoConfig,
    fm: &F,
    source: &mut Src,
    eval: Option<Evaluator<'_>>,
    observer: &mut O,
    rng: &mut R,
) -> Result<RunTrace>
where
    F: FeatureMap + ?Sized,
    Src: BatchSource<F::State>,
    O: Observer<F::State>,
    R: Rng + ?Sized,
{
    let d = fm.dim();
    cfg.validate(d)?;
    let episodic = source.is_episodic();
    let mut w = cfg.initial_weights(d);
    let mut run_mean = cfg.track_average.then(|| RunningMean::new(d));
    let mut trace = RunTrace {
        checkpoints: Vec::new(),
        final_w: Vec::new(),
        diverged: false,
        samples_consumed: 0,
        updates: 0,
        episodes: 0,
        skipped_episodes: 0,
        truncated_episodes: 0,
    };
    let mut buffers_done = 0usize;
    let total_buffers = cfg.outer_loops * cfg.buffers_per_loop;
    let mut averaged = vec![0.0; d];

    'outer: for k in 0..cfg.outer_loops {
        let snapshot = (cfg.target_mode == TargetMode::FrozenPerOuterLoop).then(|| w.clone());
        observer.outer_start(k, &w);
        let mut outputs: Vec<Vec<f64>> = Vec::new();
        for j in 0..cfg.buffers_per_loop {
            let batch = source.next_batch(&w, rng)?;
            trace.samples_consumed += batch.consumed;
            if episodic {
                trace.episodes += 1;
                trace.truncated_episodes += batch.truncated as u64;
            }
            buffers_done += 1;
            let last_in_loop = j + 1 == cfg.buffers_per_loop;

            if batch.samples.is_empty() {
                trace.skipped_episodes += 1;
            } else {
                let len = batch.samples.len();
                let order = if cfg.with_replacement && cfg.replay_order == ReplayOrder::UniformRandomPermutation {
                    sample_with_replacement(len, rng)
                } else {
                    iteration_order(len, cfg.replay_order, rng)
                };
                observer.buffer(k, j, &batch.samples, &order);
                let want_avg = cfg.combine == Combine::OptionII;
                if want_avg {
                    averaged.iter_mut().for_each(|x| *x = 0.0);
                }
                let (done, blown) = {
                    let mut ctx = PassContext {
                        eta: cfg.eta,
                        gamma: cfg.gamma,
                        target: snapshot.as_deref(),
                        buffer_sum: want_avg.then_some(averaged.as_mut_slice()),
                        run_mean: run_mean.as_mut(),
                        observer: &mut *observer,
                        outer: k,
                        buffer: j,
                    };
                    apply_updates(&mut w, &batch.samples, &order, fm, &mut ctx)
                };
                trace.updates += done as u64;
                if blown {
                    trace.diverged = true;
                    push_checkpoint(&mut trace, &w, run_mean.as_ref(), &batch, episodic, eval);
                    break 'outer;
                }
                if want_avg {
                    let inv = 1.0 / done as f64;
                    w.iter_mut().zip(&averaged).for_each(|(x, s)| *x = s * inv);
                    outputs.push(w.clone());
                }
            }

            if last_in_loop && cfg.combine == Combine::OptionII && !outputs.is_empty() {
                w = combine_iterates(Combine::OptionII, &outputs)?;
            }
            if buffers_done.is_multiple_of(cfg.checkpoint_every) || buffers_done == total_buffers {
                push_checkpoint(&mut trace, &w, run_mean.as_ref(), &batch, episodic, eval);
            }
        }
        observer.outer_end(k, &w);
    }
    trace.final_w = w;
    Ok(trace)
}

fn push_checkpoint<S>(
    trace: &mut RunTrace,
    w: &[f64],
    run_mean: Option<&RunningMean>,
    batch: &Batch<S>,
    episodic: bool,
    eval: Option<Evaluator<'_>>,
) {
    let mut metrics = Metrics::new();
    metrics.insert("weight_norm", w.iter().map(|x| x * x).sum::<f64>().sqrt());
    if episodic {
        metrics.insert("episode_length", batch.samples.len() as f64);
        metrics.insert("episode_return", batch.samples.iter().map(|s| s.reward).sum());
    }
    let avg_w = run_mean.map(|m| m.mean.clone());
    if let Some(eval) = eval {
        let reported = avg_w.as_deref().unwrap_or(w);
        metrics.extend(eval(reported));
    }
    trace.checkpoints.push(Checkpoint {
        samples: trace.samples_consumed,
        episodes: trace.episodes,
        w: w.to_vec(),
        avg_w,
        metrics,
    });
}

/// Runs any point of the configuration space with instrumentation.
///
/// Data comes from a single trajectory (`episodic = false`), from episodes
/// (`episodic = true`), or, under [`DataMode::Reuse`], from the first
/// `N·(B+u)` samples of a trajectory replayed every outer loop.
pub fn run_observed<E, O, R>(
    cfg: &AlgoConfig,
    env: &E,
    data: &DataPolicy,
    eval: Option<Evaluator<'_>>,
    observer: &mut O,
    rng: &mut R,
) -> Result<RunTrace>
where
    E: Environment,
    O: Observer<E::State>,
    R: Rng + ?Sized,
{
    if cfg.episodic {
        let mut src = EpisodeSource {
            env,
            policy: data.clone(),
            cap: cfg.episode_cap,
        };
        return run_loops(cfg, env, &mut src, eval, observer, rng);
    }
    let policy = match data {
        DataPolicy::Behavior(p) => p.clone(),
        DataPolicy::GreedyOnline => {
            return Err(Error::config("greedy-online data is only defined for episodic runs"));
        }
    };
    policy.validate(env.num_actions())?;
    match cfg.data_mode {
        DataMode::Fresh => {
            let mut src = StreamSource {
                stream: TrajectoryStream::new(env, policy),
                used: cfg.buffer_size,
                gap: cfg.gap,
            };
            run_loops(cfg, env, &mut src, eval, observer, rng)
        }
        DataMode::Reuse => {
            cfg.validate(env.dim())?;
            let len = cfg.buffers_per_loop * (cfg.buffer_size + cfg.gap);
            let dataset = crate::mdp::sample_trajectory(env, &policy, len, rng)?;
            reuse_loops(cfg, env, &dataset, eval, observer, rng)
        }
    }
}

fn reuse_loops<F, O, R>(
    cfg: &AlgoConfig,
    fm: &F,
    dataset: &[TransitionSample<F::State>],
    eval: Option<Evaluator<'_>>,
    observer: &mut O,
    rng: &mut R,
) -> Result<RunTrace>
where
    F: FeatureMap + ?Sized,
    O: Observer<F::State>,
    R: Rng + ?Sized,
{
    let stride = cfg.buffer_size + cfg.gap;
    let needed = cfg.buffers_per_loop * stride;
    if dataset.len() < needed {
        return Err(Error::config(format!(
            "dataset has {} samples, N·(B+u) = {needed} required",
            dataset.len()
        )));
    }
    let mut src = DatasetSource {
        data: dataset,
        used: cfg.buffer_size,
        stride,
        buffers: cfg.buffers_per_loop,
        cursor: 0,
    };
    run_loops(cfg, fm, &mut src, eval, observer, rng)
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(what.to_string()))
    }
}

/// Q-Rex: frozen target per outer loop, reverse replay, fresh buffers from
/// one behaviour trajectory. Consumes exactly `K·N·(B+u)` samples.
pub fn qrex_run<E: Environment, R: Rng + ?Sized>(
    cfg: &AlgoConfig,
    env: &E,
    policy: &BehaviorPolicy,
    eval: Option<Evaluator<'_>>,
    rng: &mut R,
) -> Result<RunTrace> {
    require(
        cfg.target_mode == TargetMode::FrozenPerOuterLoop,
        "Q-Rex needs a frozen target",
    )?;
    require(cfg.data_mode == DataMode::Fresh, "Q-Rex draws fresh data")?;
    require(cfg.replay_order == ReplayOrder::Reverse, "Q-Rex replays in reverse")?;
    require(
        !cfg.episodic,
        "Q-Rex uses trajectory buffers; use EpiQ-Rex for episodes",
    )?;
    run_observed(cfg, env, &DataPolicy::Behavior(policy.clone()), eval, &mut (), rng)
}

/// Q-RexDaRe: Q-Rex where every outer loop replays buffer `j` of the same
/// dataset. Only the first `N·(B+u)` samples are used.
pub fn qrexdare_run<F: FeatureMap, R: Rng + ?Sized>(
    cfg: &AlgoConfig,
    fm: &F,
    dataset: &[TransitionSample<F::State>],
    eval: Option<Evaluator<'_>>,
    rng: &mut R,
) -> Result<RunTrace> {
    require(cfg.data_mode == DataMode::Reuse, "Q-RexDaRe reuses its dataset")?;
    require(
        cfg.target_mode == TargetMode::FrozenPerOuterLoop,
        "Q-RexDaRe needs a frozen target",
    )?;
    require(!cfg.episodic, "Q-RexDaRe uses trajectory buffers")?;
    reuse_loops(cfg, fm, dataset, eval, &mut (), rng)
}

/// EpiQ-Rex: each buffer is one episode replayed in reverse against a
/// target refreshed every `N` episodes; the gap is not used.
pub fn epiqrex_run<E: Environment, R: Rng + ?Sized>(
    cfg: &AlgoConfig,
    env: &E,
    data: &DataPolicy,
    eval: Option<Evaluator<'_>>,
    rng: &mut R,
) -> Result<RunTrace> {
    require(env.is_episodic(), "EpiQ-Rex needs an episodic environment")?;
    require(
        cfg.target_mode == TargetMode::FrozenPerOuterLoop,
        "EpiQ-Rex needs a frozen target",
    )?;
    require(cfg.replay_order == ReplayOrder::Reverse, "EpiQ-Rex replays in reverse")?;
    let cfg = AlgoConfig {
        episodic: true,
        gap: 0,
        ..cfg.clone()
    };
    run_observed(&cfg, env, data, eval, &mut (), rng)
}

/// Streaming Q-learning bootstrapping from the live iterate.
///
/// The buffer structure only sets the checkpoint cadence: updates run in
/// forward order with Option I chaining and no gap, over `K·N·B` samples or
/// `K·N` episodes.
pub fn vanilla_q_run<E: Environment, R: Rng + ?Sized>(
    cfg: &AlgoConfig,
    env: &E,
    data: &DataPolicy,
    eval: Option<Evaluator<'_>>,
    rng: &mut R,
) -> Result<RunTrace> {
    require(
        cfg.target_mode == TargetMode::Live,
        "vanilla Q-learning bootstraps from the live iterate",
    )?;
    let cfg = AlgoConfig {
        replay_order: ReplayOrder::Forward,
        combine: Combine::OptionI,
        gap: 0,
        data_mode: DataMode::Fresh,
        ..cfg.clone()
    };
    run_observed(&cfg, env, data, eval, &mut (), rng)
}

/// Replay baselines: OTL+ER+Q (frozen target) and ER+Q (live target), both
/// replaying each buffer in random order.
pub fn otl_replay_q_run<E: Environment, R: Rng + ?Sized>(
    cfg: &AlgoConfig,
    env: &E,
    data: &DataPolicy,
    eval: Option<Evaluator<'_>>,
    rng: &mut R,
) -> Result<RunTrace> {
    require(
        cfg.replay_order == ReplayOrder::UniformRandomPermutation,
        "replay baselines use random order",
    )?;
    run_observed(cfg, env, data, eval, &mut (), rng)
}
