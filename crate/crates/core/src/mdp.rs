//! MDP abstractions shared by every algorithm and environment.
//!
//! Features are sparse: every environment in this crate activates at most a
//! handful of coordinates per `(state, action)` pair, so [`Phi`] stores
//! `(index, value)` pairs inline.

use std::fmt::Debug;
use std::fmt::Write as _;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Row-sum tolerance for stochastic vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Sparse feature vector `φ(s, a)` as `(coordinate, value)` pairs.
pub type Phi = SmallVec<[(usize, f64); 8]>;

/// One observed transition.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionSample<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    /// When set, `next_state` is never embedded; its bootstrap value is 0.
    pub next_terminal: bool,
}

/// Embedding `φ(s, a) ∈ ℝ^d` together with the action set.
pub trait FeatureMap {
    type State: Clone + Debug + PartialEq + Send + Sync;

    fn dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Deterministic embedding of a non-terminal state.
    fn embed(&self, state: &Self::State, action: usize) -> Phi;
}

/// A simulator that produces transitions under a caller-owned RNG.
pub trait Environment: FeatureMap {
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<TransitionSample<Self::State>>;

    fn is_episodic(&self) -> bool {
        false
    }

    /// State the trajectory continues from after `sample`.
    ///
    /// Defaults to `next_state`, or a fresh reset after a terminal
    /// transition. Environments with synchronous-style sampling override it.
    fn continue_from<R: Rng + ?Sized>(&self, sample: &TransitionSample<Self::State>, rng: &mut R) -> Self::State {
        if sample.next_terminal {
            self.reset(rng)
        } else {
            sample.next_state.clone()
        }
    }

    /// Index of a state in a finite state space, if there is one.
    fn state_index(&self, _state: &Self::State) -> Option<usize> {
        None
    }

    /// Parameters echoed into run output for reproducibility.
    fn describe(&self) -> Vec<(String, String)> {
        Vec::new()
    }
}

/// Sparse inner product `⟨φ, w⟩`.
#[inline]
pub fn dot(w: &[f64], phi: &Phi) -> f64 {
    phi.iter().map(|&(i, v)| w[i] * v).sum()
}

/// Densifies a sparse feature vector.
pub fn to_dense(phi: &Phi, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(i, v) in phi {
        out[i] += v;
    }
    out
}

/// `⟨φ, w⟩` for dense vectors.
pub fn q_value(w: &[f64], phi: &[f64]) -> Result<f64> {
    if w.len() != phi.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            got: phi.len(),
        });
    }
    Ok(w.iter().zip(phi).map(|(a, b)| a * b).sum())
}

/// `max_a' ⟨φ(state, a'), w⟩`, or 0 for a terminal state.
pub fn max_q<F: FeatureMap + ?Sized>(w: &[f64], fm: &F, state: &F::State, terminal: bool) -> f64 {
    if terminal {
        return 0.0;
    }
    (0..fm.num_actions())
        .map(|a| dot(w, &fm.embed(state, a)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lowest-index action attaining the maximum Q value.
pub fn greedy_action<F: FeatureMap + ?Sized>(w: &[f64], fm: &F, state: &F::State) -> usize {
    let mut best = 0;
    let mut best_q = f64::NEG_INFINITY;
    for a in 0..fm.num_actions() {
        let q = dot(w, &fm.embed(state, a));
        if q > best_q {
            best_q = q;
            best = a;
        }
    }
    best
}

/// The data-generating policy.
#[derive(Clone, Debug, PartialEq)]
pub enum BehaviorPolicy {
    UniformRandom,
    /// Greedy with respect to a weight vector (ties to the lowest index).
    Greedy(Vec<f64>),
    /// Per-state action distributions, indexed by [`Environment::state_index`].
    Table(Vec<Vec<f64>>),
}

impl BehaviorPolicy {
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        if let BehaviorPolicy::Table(rows) = self {
            for (s, row) in rows.iter().enumerate() {
                if row.len() != num_actions {
                    return Err(Error::Dimension {
                        expected: num_actions,
                        got: row.len(),
                    });
                }
                check_distribution(row).map_err(|e| Error::config(format!("policy row {s}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Draws an action.
    ///
    /// # Panics
    /// `Table` policies panic on environments without state indices.
    pub fn act<E: Environment + ?Sized, R: Rng + ?Sized>(&self, env: &E, state: &E::State, rng: &mut R) -> usize {
        match self {
            BehaviorPolicy::UniformRandom => rng.random_range(0..env.num_actions()),
            BehaviorPolicy::Greedy(w) => greedy_action(w, env, state),
            BehaviorPolicy::Table(rows) => {
                let s = env
                    .state_index(state)
                    .expect("table policy requires a finite state space");
                sample_categorical(&rows[s], rng)
            }
        }
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err("negative or non-finite probability".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("probabilities sum to {sum}"));
    }
    Ok(())
}

/// Endless trajectory under a behaviour policy, auto-resetting at terminals.
pub struct TrajectoryStream<'a, E: Environment> {
    env: &'a E,
    policy: BehaviorPolicy,
    state: Option<E::State>,
}

impl<'a, E: Environment> TrajectoryStream<'a, E> {
    pub fn new(env: &'a E, policy: BehaviorPolicy) -> Self {
        TrajectoryStream {
            env,
            policy,
            state: None,
        }
    }

    pub fn next_sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TransitionSample<E::State>> {
        let state = match self.state.take() {
            Some(s) => s,
            None => self.env.reset(rng),
        };
        let action = self.policy.act(self.env, &state, rng);
        let sample = self.env.step(&state, action, rng)?;
        self.state = Some(self.env.continue_from(&sample, rng));
        Ok(sample)
    }
}

/// Exactly `len` consecutive samples of a behaviour trajectory.
pub fn sample_trajectory<E: Environment, R: Rng + ?Sized>(
    env: &E,
    policy: &BehaviorPolicy,
    len: usize,
    rng: &mut R,
) -> Result<Vec<TransitionSample<E::State>>> {
    let mut stream = TrajectoryStream::new(env, policy.clone());
    (0..len).map(|_| stream.next_sample(rng)).collect()
}

/// One episode; `truncated` is set when the step cap was hit first.
#[derive(Clone, Debug)]
pub struct Episode<S> {
    pub samples: Vec<TransitionSample<S>>,
    pub truncated: bool,
}

impl<S> Episode<S> {
    pub fn total_reward(&self) -> f64 {
        self.samples.iter().map(|s| s.reward).sum()
    }
}

pub fn sample_episode<E: Environment, R: Rng + ?Sized>(
    env: &E,
    policy: &BehaviorPolicy,
    cap: usize,
    rng: &mut R,
) -> Result<Episode<E::State>> {
    if cap == 0 {
        return Err(Error::config("episode cap must be at least 1"));
    }
    let mut state = env.reset(rng);
    let mut samples = Vec::new();
    loop {
        let action = policy.act(env, &state, rng);
        let sample = env.step(&state, action, rng)?;
        let done = sample.next_terminal;
        state = sample.next_state.clone();
        samples.push(sample);
        if done {
            return Ok(Episode {
                samples,
                truncated: false,
            });
        }
        if samples.len() >= cap {
            return Ok(Episode {
                samples,
                truncated: true,
            });
        }
    }
}

/// Explicit finite MDP `(P, R, γ)`.
///
/// Transition probabilities are stored row-major as `p[(s * A + a) * S + s']`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularModel {
    num_states: usize,
    num_actions: usize,
    p: Vec<f64>,
    r: Vec<f64>,
    gamma: f64,
}

impl TabularModel {
    /// Validates and builds a model. `gamma` may be 1 for episodic models
    /// whose terminal states are absorbing with zero reward.
    pub fn new(num_states: usize, num_actions: usize, p: Vec<f64>, r: Vec<f64>, gamma: f64) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Model("state and action counts must be positive".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Model(format!("gamma {gamma} outside (0, 1]")));
        }
        let sa = num_states * num_actions;
        if p.len() != sa * num_states {
            return Err(Error::Dimension {
                expected: sa * num_states,
                got: p.len(),
            });
        }
        if r.len() != sa {
            return Err(Error::Dimension {
                expected: sa,
                got: r.len(),
            });
        }
        if let Some(i) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Model(format!("reward entry {i} is not finite")));
        }
        for (row_idx, row) in p.chunks(num_states).enumerate() {
            check_distribution(row).map_err(|e| {
                Error::Model(format!(
                    "P(.|s={}, a={}): {e}",
                    row_idx / num_actions,
                    row_idx % num_actions
                ))
            })?;
        }
        Ok(TabularModel {
            num_states,
            num_actions,
            p,
            r,
            gamma,
        })
    }

    /// Random model with strictly positive transitions and rewards in `[0, 1]`.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let sa = num_states * num_actions;
        let mut p = Vec::with_capacity(sa * num_states);
        for _ in 0..sa {
            let row: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 0.05).collect();
            let mut total: f64 = row.iter().sum();
            let start = p.len();
            p.extend(row.iter().map(|x| x / total));
            // renormalise so the row sums to 1 up to the last ulp
            total = p[start..].iter().sum();
            let last = p.len() - 1;
            p[last] += 1.0 - total;
        }
        let r = (0..sa).map(|_| rng.random::<f64>()).collect();
        Self::new(num_states, num_actions, p, r, gamma)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Model(format!("gamma {gamma} outside (0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Flat index of `(s, a)`; also the one-hot feature coordinate.
    #[inline]
    pub fn sa_index(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[self.sa_index(s, a)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    /// `P(· | s, a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.sa_index(s, a) * self.num_states;
        &self.p[start..start + self.num_states]
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_categorical(self.transition_row(s, a), rng)
    }

    /// Parses the plain-text model format:
    /// line 1 `S A gamma`, then one line `s a R p_0 .. p_{S-1}` per pair.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty model file".into()))?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("header must be `S A gamma`, got `{head}`")));
        }
        let ns: usize = parse_num(fields[0], "S")?;
        let na: usize = parse_num(fields[1], "A")?;
        let gamma: f64 = parse_num(fields[2], "gamma")?;
        if ns == 0 || na == 0 {
            return Err(Error::Model("state and action counts must be positive".into()));
        }
        let mut p = vec![f64::NAN; ns * na * ns];
        let mut r = vec![f64::NAN; ns * na];
        let mut seen = vec![false; ns * na];
        for (lineno, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 + ns {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    3 + ns,
                    f.len()
                )));
            }
            let s: usize = parse_num(f[0], "s")?;
            let a: usize = parse_num(f[1], "a")?;
            if s >= ns || a >= na {
                return Err(Error::Parse(format!(
                    "line {}: pair ({s}, {a}) out of range",
                    lineno + 2
                )));
            }
            let idx = s * na + a;
            if seen[idx] {
                return Err(Error::Parse(format!("line {}: duplicate pair ({s}, {a})", lineno + 2)));
            }
            seen[idx] = true;
            r[idx] = parse_num(f[2], "R")?;
            for (k, tok) in f[3..].iter().enumerate() {
                p[idx * ns + k] = parse_num(tok, "p")?;
            }
        }
        if let Some(missing) = seen.iter().position(|&x| !x) {
            return Err(Error::Parse(format!(
                "missing line for pair ({}, {})",
                missing / na,
                missing % na
            )));
        }
        Self::new(ns, na, p, r, gamma)
    }

    /// Serialises in the format read by [`TabularModel::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.num_states, self.num_actions, self.gamma);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let _ = write!(out, "{s} {a} {}", self.reward(s, a));
                for p in self.transition_row(s, a) {
                    let _ = write!(out, " {p}");
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("cannot parse {what} from `{tok}`")))
}
