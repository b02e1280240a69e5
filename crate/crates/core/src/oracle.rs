//! Exact ground truth for tabular models and numerical checkers for the
//! structural identities of reverse-replay Q-learning.
//!
//! Q tables are flat vectors indexed by [`TabularModel::sa_index`].

use nalgebra::{DMatrix, DVector};

use crate::algorithms::{AlgoConfig, Combine, Observer, TargetMode, UpdateEvent};
use crate::envs::tabular::{TabularEnv, TabularFeatures};
use crate::error::{Error, Result};
use crate::mdp::{dot, to_dense, BehaviorPolicy, FeatureMap, TabularModel, TransitionSample};

const POWER_ITERS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-12;

fn check_table(model: &TabularModel, q: &[f64]) -> Result<()> {
    let n = model.num_states() * model.num_actions();
    if q.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: q.len(),
        });
    }
    Ok(())
}

/// `V(s) = max_a Q(s, a)`.
pub fn state_values(model: &TabularModel, q: &[f64]) -> Vec<f64> {
    q.chunks(model.num_actions())
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// `𝒯(Q)(s, a) = R(s, a) + γ Σ_{s'} P(s'|s, a) max_{a'} Q(s', a')`.
pub fn bellman_apply(model: &TabularModel, q: &[f64]) -> Result<Vec<f64>> {
    check_table(model, q)?;
    let v = state_values(model, q);
    let (ns, na, gamma) = (model.num_states(), model.num_actions(), model.gamma());
    let mut out = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let ev: f64 = model.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
            out.push(model.reward(s, a) + gamma * ev);
        }
    }
    Ok(out)
}

pub fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Iterates `𝒯` from zero until `∥𝒯(Q) − Q∥_∞ ≤ tol`.
pub fn value_iteration(model: &TabularModel, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::config("value iteration tolerance must be positive"));
    }
    let mut q = vec![0.0; model.num_states() * model.num_actions()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let next = bellman_apply(model, &q)?;
        residual = sup_distance(&next, &q);
        if residual <= tol {
            return Ok(q);
        }
        q = next;
    }
    Err(Error::NoConvergence {
        what: "value iteration",
        iters: max_iters,
        residual,
    })
}

/// `w̄¹ = 0, w̄^{t+1} = 𝒯(w̄^t)`; returns `k` iterates.
pub fn noiseless_q_iteration(model: &TabularModel, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    let mut out = vec![vec![0.0; model.num_states() * model.num_actions()]];
    for _ in 1..k {
        let next = bellman_apply(model, out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// `max |⟨φ(s, a), x⟩|` over the given pairs.
pub fn phi_sup_norm<F: FeatureMap + ?Sized>(x: &[f64], fm: &F, pairs: &[(F::State, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::config("empty evaluation set"));
    }
    if x.len() != fm.dim() {
        return Err(Error::Dimension {
            expected: fm.dim(),
            got: x.len(),
        });
    }
    Ok(pairs
        .iter()
        .map(|(s, a)| dot(x, &fm.embed(s, *a)).abs())
        .fold(0.0, f64::max))
}

/// `max |⟨φ(s, a), w⟩ − Q*(s, a)|` over tabular pairs.
pub fn q_sup_error<F: FeatureMap<State = usize> + ?Sized>(
    w: &[f64],
    fm: &F,
    model: &TabularModel,
    qstar: &[f64],
    pairs: &[(usize, usize)],
) -> f64 {
    pairs
        .iter()
        .map(|&(s, a)| (dot(w, &fm.embed(&s, a)) - qstar[model.sa_index(s, a)]).abs())
        .fold(0.0, f64::max)
}

/// Per-state action distributions of a policy on a finite state space.
pub fn policy_table<F: FeatureMap<State = usize> + ?Sized>(
    policy: &BehaviorPolicy,
    fm: &F,
    num_states: usize,
) -> Result<Vec<Vec<f64>>> {
    let na = fm.num_actions();
    policy.validate(na)?;
    Ok(match policy {
        BehaviorPolicy::UniformRandom => vec![vec![1.0 / na as f64; na]; num_states],
        BehaviorPolicy::Greedy(w) => (0..num_states)
            .map(|s| {
                let a = crate::mdp::greedy_action(w, fm, &s);
                let mut row = vec![0.0; na];
                row[a] = 1.0;
                row
            })
            .collect(),
        BehaviorPolicy::Table(rows) => {
            if rows.len() != num_states {
                return Err(Error::Dimension {
                    expected: num_states,
                    got: rows.len(),
                });
            }
            rows.clone()
        }
    })
}

/// `P^π(s, s') = Σ_a π(a|s) P(s'|s, a)`.
pub fn induced_chain(model: &TabularModel, pi: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ns = model.num_states();
    if pi.len() != ns {
        return Err(Error::Dimension {
            expected: ns,
            got: pi.len(),
        });
    }
    let mut m = DMatrix::zeros(ns, ns);
    for s in 0..ns {
        for (a, &pa) in pi[s].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (t, &p) in model.transition_row(s, a).iter().enumerate() {
                m[(s, t)] += pa * p;
            }
        }
    }
    Ok(m)
}

/// Stationary distribution of the behaviour chain.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleDiagnostics {
    /// `μ(s)` over states.
    pub state_mu: Vec<f64>,
    /// `μ(s, a) = μ(s) π(a|s)`, indexed like a Q table.
    pub mu: Vec<f64>,
    /// Smallest entry of `mu`.
    pub mu_min: f64,
    pub kappa: f64,
    pub iterations: usize,
}

/// Power iteration `μ ← μ P^π` from the uniform distribution.
///
/// Fails when the iteration does not settle, which usually means the chain
/// is periodic or reducible.
pub fn stationary_distribution(model: &TabularModel, pi: &[Vec<f64>]) -> Result<OracleDiagnostics> {
    let chain = induced_chain(model, pi)?;
    let ns = model.num_states();
    let pt = chain.transpose();
    let mut mu = DVector::from_element(ns, 1.0 / ns as f64);
    let mut change = f64::INFINITY;
    for it in 1..=POWER_ITERS {
        let mut next = &pt * &mu;
        let total = next.sum();
        next /= total;
        change = (&next - &mu).abs().sum();
        mu = next;
        if change <= POWER_TOL {
            let state_mu: Vec<f64> = mu.iter().copied().collect();
            let na = model.num_actions();
            let sa: Vec<f64> = (0..ns * na).map(|i| state_mu[i / na] * pi[i / na][i % na]).collect();
            let mu_min = sa.iter().copied().fold(f64::INFINITY, f64::min);
            return Ok(OracleDiagnostics {
                state_mu,
                mu: sa,
                mu_min,
                kappa: 1.0 / mu_min,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "stationary distribution",
        iters: POWER_ITERS,
        residual: change,
    })
}

/// `Q^π` by iterating `Q ← R + γ P (π·Q)` until the sup change is `≤ tol`.
pub fn policy_evaluation(model: &TabularModel, pi: &[Vec<f64>], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let (ns, na, gamma) = (model.num_states(), model.num_actions(), model.gamma());
    if pi.len() != ns {
        return Err(Error::Dimension {
            expected: ns,
            got: pi.len(),
        });
    }
    let mut q = vec![0.0; ns * na];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let v: Vec<f64> = (0..ns)
            .map(|s| pi[s].iter().zip(&q[s * na..(s + 1) * na]).map(|(p, x)| p * x).sum())
            .collect();
        let mut next = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let ev: f64 = model.transition_row(s, a).iter().zip(&v).map(|(p, x)| p * x).sum();
                next.push(model.reward(s, a) + gamma * ev);
            }
        }
        residual = sup_distance(&next, &q);
        q = next;
        if residual <= tol {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence {
        what: "policy evaluation",
        iters: max_iters,
        residual,
    })
}

/// `w* = (I − γAᵀ)⁻¹ θ`, the value weights of the linear system.
pub fn lds_closed_form(a: &DMatrix<f64>, theta: &DVector<f64>, gamma: f64) -> Result<Vec<f64>> {
    let d = theta.len();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            got: a.nrows(),
        });
    }
    let rho = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(gamma * rho < 1.0) {
        return Err(Error::Singular(format!("spectral radius of γA is {}", gamma * rho)));
    }
    let m = DMatrix::identity(d, d) - a.transpose() * gamma;
    let lu = m.lu();
    let w = lu
        .solve(theta)
        .ok_or_else(|| Error::Singular("I − γAᵀ is singular".into()))?;
    Ok(w.iter().copied().collect())
}

/// `u* = ((β + √(β² + 4α)) / 2)²`, the fixed point of `u ↦ α + β√u`.
pub fn hypercontract_fixed_point(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::config("alpha and beta must be non-negative"));
    }
    let root = (beta + (beta * beta + 4.0 * alpha).sqrt()) / 2.0;
    Ok(root * root)
}

/// One replayed buffer: its samples and the 1-based positions in the order
/// they were consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedBuffer<S> {
    pub samples: Vec<TransitionSample<S>>,
    pub order: Vec<usize>,
    /// Iterate after the last update of the buffer.
    pub w_end: Vec<f64>,
}

/// Everything that happened in one outer loop.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordedLoop<S> {
    pub outer: usize,
    pub eta: f64,
    pub gamma: f64,
    pub combine: Combine,
    pub target_mode: TargetMode,
    /// Iterate on entry (the frozen target).
    pub w_start: Vec<f64>,
    /// Iterate on exit.
    pub w_end: Vec<f64>,
    pub buffers: Vec<RecordedBuffer<S>>,
    /// Largest deviation between any bootstrap vector and `w_start`.
    pub target_drift: f64,
}

/// Observer that records every outer loop of a run.
#[derive(Clone, Debug)]
pub struct LoopRecorder<S> {
    eta: f64,
    gamma: f64,
    combine: Combine,
    target_mode: TargetMode,
    pub loops: Vec<RecordedLoop<S>>,
    /// Smallest and largest weight entry seen after any update.
    pub w_range: (f64, f64),
}

impl<S> LoopRecorder<S> {
    pub fn new(cfg: &AlgoConfig) -> Self {
        LoopRecorder {
            eta: cfg.eta,
            gamma: cfg.gamma,
            combine: cfg.combine,
            target_mode: cfg.target_mode,
            loops: Vec::new(),
            w_range: (f64::INFINITY, f64::NEG_INFINITY),
        }
    }

    /// Largest target drift over all recorded loops.
    pub fn max_target_drift(&self) -> f64 {
        self.loops.iter().map(|l| l.target_drift).fold(0.0, f64::max)
    }
}

impl<S: Clone> Observer<S> for LoopRecorder<S> {
    fn outer_start(&mut self, outer: usize, w: &[f64]) {
        self.loops.push(RecordedLoop {
            outer,
            eta: self.eta,
            gamma: self.gamma,
            combine: self.combine,
            target_mode: self.target_mode,
            w_start: w.to_vec(),
            w_end: Vec::new(),
            buffers: Vec::new(),
            target_drift: 0.0,
        });
    }

    fn buffer(&mut self, _outer: usize, _buffer: usize, samples: &[TransitionSample<S>], order: &[usize]) {
        let lp = self.loops.last_mut().expect("buffer inside a loop");
        lp.buffers.push(RecordedBuffer {
            samples: samples.to_vec(),
            order: order.to_vec(),
            w_end: lp
                .buffers
                .last()
                .map_or_else(|| lp.w_start.clone(), |b| b.w_end.clone()),
        });
    }

    fn before_update(&mut self, event: &UpdateEvent<'_, S>) {
        let lp = self.loops.last_mut().expect("update inside a loop");
        lp.target_drift = lp.target_drift.max(sup_distance(event.bootstrap_w, &lp.w_start));
    }

    fn after_update(&mut self, _outer: usize, _buffer: usize, _step: usize, w: &[f64]) {
        let lp = self.loops.last_mut().expect("update inside a loop");
        let buf = lp.buffers.last_mut().expect("update inside a buffer");
        buf.w_end.clear();
        buf.w_end.extend_from_slice(w);
        for &x in w {
            self.w_range.0 = self.w_range.0.min(x);
            self.w_range.1 = self.w_range.1.max(x);
        }
    }

    fn outer_end(&mut self, _outer: usize, w: &[f64]) {
        if let Some(lp) = self.loops.last_mut() {
            lp.w_end = w.to_vec();
        }
    }
}

/// Per-buffer contraction matrices and error vectors of one outer loop.
///
/// For buffer `j` replayed as steps `t = 1..B`, `H^j` is the product of
/// `I − η φ_t φ_tᵀ` with the latest step on the left, and
/// `L^j = η Σ_t ε_t (∏_{t' > t} (I − η φ_{t'} φ_{t'}ᵀ)) φ_t`. Under reverse
/// replay the latest step is position 1, so `H^j = ∏_{i=1}^{B}` in position
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionFactors {
    pub h: Vec<DMatrix<f64>>,
    pub l: Vec<DVector<f64>>,
    /// `N^k(s, a)`: visits of each pair during the loop.
    pub visits: Vec<u64>,
    /// `ε` of every update, grouped by buffer, in replay order.
    pub errors: Vec<Vec<f64>>,
}

fn one_hot_env(env: &TabularEnv) -> Result<()> {
    if !matches!(env.features(), TabularFeatures::OneHot) {
        return Err(Error::config("identity checks need one-hot tabular features"));
    }
    Ok(())
}

/// `ε = r − R(s, a) + γ max_{a'} w(s', a') − γ Σ_{s'} P(s'|s, a) max_{a'} w(s', a')`.
fn sample_error(model: &TabularModel, v: &[f64], gamma: f64, sample: &TransitionSample<usize>) -> f64 {
    let (s, a) = (sample.state, sample.action);
    let boot = if sample.next_terminal {
        0.0
    } else {
        v[sample.next_state]
    };
    let ev: f64 = model.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
    sample.reward - model.reward(s, a) + gamma * (boot - ev)
}

/// Builds `H`, `L` and the visit counters for a recorded loop.
pub fn contraction_factors(rec: &RecordedLoop<usize>, env: &TabularEnv) -> Result<ContractionFactors> {
    one_hot_env(env)?;
    let model = env.model();
    let d = env.dim();
    if rec.w_start.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: rec.w_start.len(),
        });
    }
    let v = state_values(model, &rec.w_start);
    let mut visits = vec![0u64; d];
    let mut hs = Vec::with_capacity(rec.buffers.len());
    let mut ls = Vec::with_capacity(rec.buffers.len());
    let mut errors = Vec::with_capacity(rec.buffers.len());
    for buf in &rec.buffers {
        let mut h = DMatrix::<f64>::identity(d, d);
        let mut l = DVector::<f64>::zeros(d);
        let mut errs = Vec::with_capacity(buf.order.len());
        for &pos in &buf.order {
            let sample = buf
                .samples
                .get(pos - 1)
                .ok_or_else(|| Error::MissingRecording(format!("position {pos}")))?;
            let phi = DVector::from_vec(to_dense(&env.embed(&sample.state, sample.action), d));
            let step = DMatrix::identity(d, d) - &phi * phi.transpose() * rec.eta;
            let eps = sample_error(model, &v, rec.gamma, sample);
            h = &step * h;
            l = &step * l + &phi * (rec.eta * eps);
            visits[model.sa_index(sample.state, sample.action)] += 1;
            errs.push(eps);
        }
        hs.push(h);
        ls.push(l);
        errors.push(errs);
    }
    Ok(ContractionFactors {
        h: hs,
        l: ls,
        visits,
        errors,
    })
}

/// `∥LHS − RHS∥_∞` of the bias-variance identity for one recorded loop:
/// `w_end − 𝒯(w_start) = H^N⋯H^1 (w_start − 𝒯(w_start)) + Σ_j H^N⋯H^{j+1} L^j`.
pub fn bias_variance_residual(rec: &RecordedLoop<usize>, env: &TabularEnv) -> Result<f64> {
    if rec.combine != Combine::OptionI {
        return Err(Error::config("the identity holds for Option I chaining"));
    }
    if rec.target_mode != TargetMode::FrozenPerOuterLoop {
        return Err(Error::config("the identity needs a frozen target"));
    }
    if rec.w_end.is_empty() {
        return Err(Error::MissingRecording("loop did not finish".into()));
    }
    let model = env.model().clone().with_gamma(rec.gamma)?;
    let factors = contraction_factors(rec, env)?;
    let w_star = DVector::from_vec(bellman_apply(&model, &rec.w_start)?);
    let w1 = DVector::from_vec(rec.w_start.clone());
    let lhs = DVector::from_vec(rec.w_end.clone()) - &w_star;
    // fold left to right: e ← H^j e + L^j
    let mut rhs = w1 - &w_star;
    for (h, l) in factors.h.iter().zip(&factors.l) {
        rhs = h * rhs + l;
    }
    Ok((lhs - rhs).amax())
}

/// `(⟨e_{(s,a)}, H^N⋯H^1 g⟩, (1 − η)^{N^k(s,a)} g(s, a))`.
pub fn tabular_bias_factor(
    rec: &RecordedLoop<usize>,
    env: &TabularEnv,
    g: &[f64],
    s: usize,
    a: usize,
) -> Result<(f64, f64)> {
    let factors = contraction_factors(rec, env)?;
    let d = env.dim();
    if g.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: g.len(),
        });
    }
    let mut x = DVector::from_vec(g.to_vec());
    for h in &factors.h {
        x = h * x;
    }
    let idx = env.model().sa_index(s, a);
    let rhs = (1.0 - rec.eta).powi(factors.visits[idx] as i32) * g[idx];
    Ok((x[idx], rhs))
}

/// `N^{k,j}_i(s, a)`: visits strictly before position `i` of buffer `j`
/// plus every visit in buffers `j+1..N` (all indices 1-based).
pub fn visits_after(rec: &RecordedLoop<usize>, env: &TabularEnv, j: usize, i: usize) -> Result<Vec<u64>> {
    one_hot_env(env)?;
    if j == 0 || j > rec.buffers.len() {
        return Err(Error::MissingRecording(format!("buffer {j}")));
    }
    let model = env.model();
    let mut out = vec![0u64; env.dim()];
    let buf = &rec.buffers[j - 1];
    for s in buf.samples.iter().take(i.saturating_sub(1)) {
        out[model.sa_index(s.state, s.action)] += 1;
    }
    for later in &rec.buffers[j..] {
        for s in &later.samples {
            out[model.sa_index(s.state, s.action)] += 1;
        }
    }
    Ok(out)
}
