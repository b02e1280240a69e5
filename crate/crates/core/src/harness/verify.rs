//! Randomised identity checks behind `qrex verify`.

use std::fmt;

use rand::Rng;

use crate::algorithms::{run_observed, AlgoConfig, Combine, DataPolicy, TargetMode};
use crate::envs::{RewardNoise, TabularEnv};
use crate::error::Result;
use crate::mdp::{BehaviorPolicy, TabularModel};
use crate::oracle::{self, LoopRecorder};
use crate::replay::ReplayOrder;
use crate::{seeded_rng, SeedRng};

pub const MASTER_SEED: u64 = 0x005e_ed0f_7e57;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

/// Outcome of one check: `measured` must not exceed `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub instances: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.measured <= self.threshold
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} measured {:.3e} (limit {:.1e}, {} instances)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold,
            self.instances
        )
    }
}

struct Sizes {
    mdps: usize,
    pairs: usize,
    updates: usize,
}

fn random_model(rng: &mut SeedRng, gamma: f64) -> Result<TabularModel> {
    let s = rng.random_range(2..=5);
    let a = rng.random_range(1..=3);
    TabularModel::random(s, a, gamma, rng)
}

fn record(env: &TabularEnv, cfg: &AlgoConfig, seed: u64) -> Result<LoopRecorder<usize>> {
    let mut rec = LoopRecorder::new(cfg);
    run_observed(
        cfg,
        env,
        &DataPolicy::Behavior(BehaviorPolicy::UniformRandom),
        None,
        &mut rec,
        &mut seeded_rng(seed),
    )?;
    Ok(rec)
}

/// Runs every check with a fixed master seed.
pub fn verify_suite(scale: Scale) -> Result<Vec<CheckResult>> {
    let sz = match scale {
        Scale::Quick => Sizes {
            mdps: 10,
            pairs: 100,
            updates: 20_000,
        },
        Scale::Full => Sizes {
            mdps: 100,
            pairs: 1000,
            updates: 200_000,
        },
    };
    let mut rng = seeded_rng(MASTER_SEED);
    let mut out = Vec::new();

    // bias-variance identity, tabular bias factor and target freshness
    let (mut bv, mut tb, mut drift) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..sz.mdps {
        let model = random_model(&mut rng, 0.9)?;
        let env = TabularEnv::new(model).with_noise(RewardNoise::Bernoulli);
        let cfg = AlgoConfig::qrex(0.05, 0.9, 2, 3, 5, 0);
        let rec = record(&env, &cfg, i as u64)?;
        drift = drift.max(rec.max_target_drift());
        let d = env.model().num_states() * env.model().num_actions();
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for lp in &rec.loops {
            bv = bv.max(oracle::bias_variance_residual(lp, &env)?);
            for s in 0..env.model().num_states() {
                for a in 0..env.model().num_actions() {
                    let (l, r) = oracle::tabular_bias_factor(lp, &env, &g, s, a)?;
                    tb = tb.max((l - r).abs());
                }
            }
        }
    }
    out.push(CheckResult {
        name: "bias_variance_identity",
        measured: bv,
        threshold: 1e-10,
        instances: sz.mdps,
    });
    out.push(CheckResult {
        name: "tabular_bias_factor",
        measured: tb,
        threshold: 1e-12,
        instances: sz.mdps,
    });
    out.push(CheckResult {
        name: "target_freshness",
        measured: drift,
        threshold: 0.0,
        instances: sz.mdps,
    });

    // contraction of the Bellman operator, as the count of violations
    let mut violations = 0usize;
    let mut vi_residual = 0.0f64;
    let mut qstar_excess = f64::NEG_INFINITY;
    let mut noiseless_excess = f64::NEG_INFINITY;
    for _ in 0..10 {
        let gamma = rng.random_range(0.5..0.99);
        let model = random_model(&mut rng, gamma)?;
        let n = model.num_states() * model.num_actions();
        for _ in 0..sz.pairs {
            let q1: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let q2: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let lhs = oracle::sup_distance(
                &oracle::bellman_apply(&model, &q1)?,
                &oracle::bellman_apply(&model, &q2)?,
            );
            if lhs > gamma * oracle::sup_distance(&q1, &q2) {
                violations += 1;
            }
        }
        let tol = 1e-12;
        let qstar = oracle::value_iteration(&model, tol, 1_000_000)?;
        // distance of the computed fixed point from the exact one
        let vi_err = gamma * tol / (1.0 - gamma);
        vi_residual = vi_residual.max(oracle::sup_distance(&oracle::bellman_apply(&model, &qstar)?, &qstar));
        let qnorm = qstar.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        qstar_excess = qstar_excess.max(qnorm - 1.0 / (1.0 - gamma));
        for (k, w) in oracle::noiseless_q_iteration(&model, 50)?.iter().enumerate() {
            let bound = gamma.powi(k as i32) * qnorm;
            noiseless_excess = noiseless_excess.max(oracle::sup_distance(w, &qstar) - bound - 2.0 * vi_err);
        }
    }
    out.push(CheckResult {
        name: "bellman_contraction",
        measured: violations as f64,
        threshold: 0.0,
        instances: 10 * sz.pairs,
    });
    out.push(CheckResult {
        name: "value_iteration_residual",
        measured: vi_residual,
        threshold: 1e-10,
        instances: 10,
    });
    out.push(CheckResult {
        name: "optimal_value_bound",
        measured: qstar_excess.max(0.0),
        threshold: 0.0,
        instances: 10,
    });
    out.push(CheckResult {
        name: "noiseless_iteration_rate",
        measured: noiseless_excess.max(0.0),
        threshold: 0.0,
        instances: 10,
    });

    // uniform iterate bound for every runner variant
    let mut bound_excess = 0.0f64;
    let variants = [
        (TargetMode::FrozenPerOuterLoop, ReplayOrder::Reverse),
        (TargetMode::FrozenPerOuterLoop, ReplayOrder::UniformRandomPermutation),
        (TargetMode::FrozenPerOuterLoop, ReplayOrder::Forward),
        (TargetMode::Live, ReplayOrder::Forward),
        (TargetMode::Live, ReplayOrder::UniformRandomPermutation),
    ];
    for (i, (target_mode, replay_order)) in variants.iter().enumerate() {
        for gamma in [0.5, 0.9] {
            let model = random_model(&mut rng, gamma)?;
            let env = TabularEnv::new(model).with_noise(RewardNoise::Bernoulli);
            let (b, n) = (50, 4);
            let cfg = AlgoConfig {
                target_mode: *target_mode,
                replay_order: *replay_order,
                combine: if i % 2 == 0 {
                    Combine::OptionI
                } else {
                    Combine::OptionII
                },
                ..AlgoConfig::qrex(0.1, gamma, sz.updates / (b * n), n, b, 2)
            };
            let rec = record(&env, &cfg, i as u64)?;
            let (lo, hi) = rec.w_range;
            bound_excess = bound_excess.max(-lo).max(hi - 1.0 / (1.0 - gamma));
        }
    }
    out.push(CheckResult {
        name: "uniform_iterate_bound",
        measured: bound_excess.max(0.0),
        threshold: 0.0,
        instances: variants.len() * 2,
    });

    let mut fixed = 0.0f64;
    for _ in 0..sz.pairs {
        let (a, b) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let u = oracle::hypercontract_fixed_point(a, b)?;
        fixed = fixed.max((u - a - b * u.sqrt()).abs());
    }
    out.push(CheckResult {
        name: "hypercontract_fixed_point",
        measured: fixed,
        threshold: 1e-12,
        instances: sz.pairs,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let report = verify_suite(Scale::Quick).unwrap();
        assert!(report.len() >= 9);
        for check in &report {
            assert!(check.passed(), "{check}");
        }
    }
}
