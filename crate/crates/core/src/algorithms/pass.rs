use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{dot, max_q, FeatureMap, TransitionSample};
use crate::replay::{iteration_order, ReplayOrder};

use super::runner::{Observer, UpdateEvent};

/// Any weight beyond this magnitude marks the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Result of one pass over a buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PassOutput {
    pub w_end: Vec<f64>,
    /// Mean of the post-update iterates.
    pub w_avg: Vec<f64>,
    /// 1-based buffer positions in the order they were consumed.
    pub log: Vec<usize>,
    pub diverged: bool,
}

/// Incremental mean of a stream of vectors.
#[derive(Clone, Debug)]
pub(crate) struct RunningMean {
    pub mean: Vec<f64>,
    pub count: u64,
}

impl RunningMean {
    pub fn new(dim: usize) -> Self {
        RunningMean {
            mean: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for (m, v) in self.mean.iter_mut().zip(x) {
            *m += (v - *m) * inv;
        }
    }
}

pub(crate) struct PassContext<'a, O> {
    pub eta: f64,
    pub gamma: f64,
    /// Frozen bootstrap weights; `None` bootstraps against the live iterate.
    pub target: Option<&'a [f64]>,
    /// Sum of post-update iterates for this buffer, if requested.
    pub buffer_sum: Option<&'a mut [f64]>,
    pub run_mean: Option<&'a mut RunningMean>,
    pub observer: &'a mut O,
    pub outer: usize,
    pub buffer: usize,
}

/// Applies `w ← w + η[r + γ·max_a' ⟨φ(s', a'), w_boot⟩ − ⟨φ(s, a), w⟩]·φ(s, a)`
/// for each position of `order` (1-based). Returns the number of updates
/// completed and whether the iterate diverged.
pub(crate) fn apply_updates<F, O>(
    w: &mut [f64],
    samples: &[TransitionSample<F::State>],
    order: &[usize],
    fm: &F,
    ctx: &mut PassContext<'_, O>,
) -> (usize, bool)
where
    F: FeatureMap + ?Sized,
    O: Observer<F::State>,
{
    for (step, &pos) in order.iter().enumerate() {
        let sample = &samples[pos - 1];
        let boot_w: &[f64] = match ctx.target {
            Some(t) => t,
            None => w,
        };
        let boot = if sample.next_terminal {
            0.0
        } else {
            ctx.gamma * max_q(boot_w, fm, &sample.next_state, false)
        };
        ctx.observer.before_update(&UpdateEvent {
            outer: ctx.outer,
            buffer: ctx.buffer,
            step,
            position: pos,
            sample,
            bootstrap_w: boot_w,
        });
        let phi = fm.embed(&sample.state, sample.action);
        let td = sample.reward + boot - dot(w, &phi);
        let scale = ctx.eta * td;
        let mut blown = !scale.is_finite();
        for &(i, v) in &phi {
            w[i] += scale * v;
            blown |= !(w[i].abs() <= DIVERGENCE_LIMIT);
        }
        ctx.observer.after_update(ctx.outer, ctx.buffer, step, w);
        if let Some(sum) = ctx.buffer_sum.as_deref_mut() {
            for (s, x) in sum.iter_mut().zip(w.iter()) {
                *s += x;
            }
        }
        if let Some(rm) = ctx.run_mean.as_deref_mut() {
            rm.push(w);
        }
        if blown {
            return (step + 1, true);
        }
    }
    (order.len(), false)
}

struct Silent;
impl<S> Observer<S> for Silent {}

/// One pass over `buf` in the given order.
///
/// With `target_w = Some(t)` every bootstrap reads `t`; with `None` it reads
/// the evolving iterate.
#[allow(clippy::too_many_arguments)]
pub fn inner_buffer_pass<F, R>(
    w_start: &[f64],
    target_w: Option<&[f64]>,
    buf: &[TransitionSample<F::State>],
    eta: f64,
    gamma: f64,
    order: ReplayOrder,
    fm: &F,
    rng: &mut R,
) -> Result<PassOutput>
where
    F: FeatureMap + ?Sized,
    R: Rng + ?Sized,
{
    let d = fm.dim();
    if w_start.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: w_start.len(),
        });
    }
    if let Some(t) = target_w {
        if t.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: t.len(),
            });
        }
    }
    let positions = iteration_order(buf.len(), order, rng);
    let mut w = w_start.to_vec();
    let mut sum = vec![0.0; d];
    let mut observer = Silent;
    let (done, diverged) = {
        let mut ctx = PassContext {
            eta,
            gamma,
            target: target_w,
            buffer_sum: Some(&mut sum),
            run_mean: None,
            observer: &mut observer,
            outer: 0,
            buffer: 0,
        };
        apply_updates(&mut w, buf, &positions, fm, &mut ctx)
    };
    let w_avg = if done == 0 {
        w.clone()
    } else {
        sum.iter().map(|s| s / done as f64).collect()
    };
    Ok(PassOutput {
        w_end: w,
        w_avg,
        log: positions[..done].to_vec(),
        diverged,
    })
}
