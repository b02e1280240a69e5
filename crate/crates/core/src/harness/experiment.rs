//! Seed fan-out and aggregation.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;

use crate::algorithms::{run_observed, DataPolicy, Evaluator, RunTrace};
use crate::envs::{gridworld, random_walk, Baird, Lds, MountainCar, RewardNoise, TabularEnv};
use crate::error::{Error, Result};
use crate::mdp::{BehaviorPolicy, Environment, TabularModel};
use crate::oracle;
use crate::seeded_rng;

use super::config::{Behavior, ExperimentConfig, ExperimentKind};

const VI_TOL: f64 = 1e-10;
const VI_ITERS: usize = 1_000_000;

/// An environment together with its ground truth.
pub enum BuiltEnv {
    Tabular { env: TabularEnv, qstar: Vec<f64> },
    MountainCar(MountainCar),
    Baird(Baird),
    Lds { env: Lds, wstar: Vec<f64> },
}

impl BuiltEnv {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let tabular = |env: TabularEnv| -> Result<BuiltEnv> {
            let qstar = oracle::value_iteration(env.model(), VI_TOL, VI_ITERS)?;
            Ok(BuiltEnv::Tabular { env, qstar })
        };
        let noise = if cfg.reward_noise > 0.0 {
            RewardNoise::Uniform {
                half_width: cfg.reward_noise,
            }
        } else {
            RewardNoise::None
        };
        match cfg.experiment {
            ExperimentKind::Gridworld => tabular(gridworld::env(cfg.gamma, cfg.reward_noise)),
            ExperimentKind::Randomwalk => {
                tabular(random_walk::env(cfg.states, cfg.groups, cfg.gamma).with_noise(noise))
            }
            ExperimentKind::CustomTabular => {
                let text = std::fs::read_to_string(&cfg.model_file)?;
                let model = TabularModel::parse(&text)?.with_gamma(cfg.gamma)?;
                tabular(TabularEnv::new(model).with_noise(noise))
            }
            ExperimentKind::Mountaincar => Ok(BuiltEnv::MountainCar(MountainCar::new(cfg.tilings, cfg.tiles)?)),
            ExperimentKind::Baird => Ok(BuiltEnv::Baird(Baird::new(cfg.baird_embedding))),
            ExperimentKind::Lds => {
                let env = Lds::random(cfg.lds_dim, cfg.rho, cfg.sigma, &mut seeded_rng(cfg.env_seed))?;
                let wstar = oracle::lds_closed_form(env.a(), env.theta(), cfg.gamma)?;
                Ok(BuiltEnv::Lds { env, wstar })
            }
        }
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        match self {
            BuiltEnv::Tabular { env, .. } => env.describe(),
            BuiltEnv::MountainCar(env) => env.describe(),
            BuiltEnv::Baird(env) => env.describe(),
            BuiltEnv::Lds { env, .. } => env.describe(),
        }
    }
}

/// Curve of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// `(x, metric values in config order)` per checkpoint.
    pub points: Vec<(u64, Vec<f64>)>,
    pub diverged: bool,
    pub truncated_episodes: u64,
}

/// All seeds of one experiment, in seed order.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub env_description: Vec<(String, String)>,
    pub x_unit: &'static str,
    pub runs: Vec<SeedResult>,
}

/// Mean and standard error of one metric at one x.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub x: u64,
    pub mean: f64,
    pub stderr: f64,
    /// Seeds contributing (diverged runs stop contributing).
    pub count: usize,
}

impl AggregateResult {
    pub fn metric_index(&self, metric: &str) -> Option<usize> {
        self.config.metrics.iter().position(|m| m == metric)
    }

    /// Mean curve of `metric` over every seed that reached each x.
    pub fn curve(&self, metric: &str) -> Vec<CurvePoint> {
        let Some(m) = self.metric_index(metric) else {
            return Vec::new();
        };
        let mut by_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for run in &self.runs {
            for (x, values) in &run.points {
                by_x.entry(*x).or_default().push(values[m]);
            }
        }
        by_x.into_iter()
            .map(|(x, v)| {
                let (mean, stderr) = mean_stderr(&v);
                CurvePoint {
                    x,
                    mean,
                    stderr,
                    count: v.len(),
                }
            })
            .collect()
    }

    /// Per-seed values of `metric` at each seed's last checkpoint.
    pub fn final_values(&self, metric: &str) -> Vec<f64> {
        let Some(m) = self.metric_index(metric) else {
            return Vec::new();
        };
        self.runs
            .iter()
            .filter_map(|r| r.points.last().map(|(_, v)| v[m]))
            .collect()
    }

    pub fn diverged_seeds(&self) -> Vec<u64> {
        self.runs.iter().filter(|r| r.diverged).map(|r| r.seed).collect()
    }
}

/// Sample mean and standard error (0 for a single value).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn x_unit(cfg: &ExperimentConfig) -> &'static str {
    if cfg.experiment.is_episodic() {
        "episodes"
    } else {
        "samples"
    }
}

fn run_env<E: Environment>(cfg: &ExperimentConfig, env: &E, eval: Evaluator<'_>, seed: u64) -> Result<RunTrace> {
    let algo = cfg.algo_config(env.dim());
    let data = match cfg.behavior {
        Behavior::Uniform => DataPolicy::Behavior(BehaviorPolicy::UniformRandom),
        Behavior::GreedyOnline => DataPolicy::GreedyOnline,
    };
    run_observed(&algo, env, &data, Some(eval), &mut (), &mut seeded_rng(seed))
}

/// One seed of an experiment on a prebuilt environment.
pub fn run_seed(cfg: &ExperimentConfig, built: &BuiltEnv, seed: u64) -> Result<SeedResult> {
    let wants = |m: &str| cfg.metrics.iter().any(|x| x == m);
    let trace = match built {
        BuiltEnv::Tabular { env, qstar } => {
            let pairs = env.eval_pairs();
            let model = env.model();
            let eval = |w: &[f64]| {
                if wants("sup_error") {
                    vec![("sup_error", oracle::q_sup_error(w, env, model, qstar, &pairs))]
                } else {
                    Vec::new()
                }
            };
            run_env(cfg, env, &eval, seed)?
        }
        BuiltEnv::MountainCar(env) => run_env(cfg, env, &|_: &[f64]| Vec::new(), seed)?,
        BuiltEnv::Baird(env) => {
            let pairs: Vec<(usize, usize)> = (0..crate::envs::baird::NUM_STATES).map(|s| (s, 0)).collect();
            let eval = |w: &[f64]| {
                if wants("sup_error") {
                    vec![("sup_error", oracle::phi_sup_norm(w, env, &pairs).unwrap_or(f64::NAN))]
                } else {
                    Vec::new()
                }
            };
            run_env(cfg, env, &eval, seed)?
        }
        BuiltEnv::Lds { env, wstar } => {
            let eval = |w: &[f64]| {
                let err = w.iter().zip(wstar).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                vec![("l2_weight_error", err)]
            };
            run_env(cfg, env, &eval, seed)?
        }
    };
    let episodic = cfg.experiment.is_episodic();
    let mut points = Vec::with_capacity(trace.checkpoints.len());
    for c in &trace.checkpoints {
        let x = if episodic { c.episodes } else { c.samples };
        let values: Vec<f64> = cfg
            .metrics
            .iter()
            .map(|m| c.metrics.get(m.as_str()).copied().unwrap_or(f64::NAN))
            .collect();
        points.push((x, values));
    }
    // a diverged run may end on the same x as its last regular checkpoint
    points.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 = later.1.clone();
            true
        } else {
            false
        }
    });
    Ok(SeedResult {
        seed,
        points,
        diverged: trace.diverged,
        truncated_episodes: trace.truncated_episodes,
    })
}

/// Runs seeds `base_seed..base_seed + seeds` on at most `jobs` threads.
/// Results come back in seed order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<AggregateResult> {
    if jobs == 0 {
        return Err(Error::config("jobs must be at least 1"));
    }
    cfg.validate()?;
    let built = BuiltEnv::new(cfg)?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.base_seed.wrapping_add(i)).collect();
    let one = |seed: u64| -> Result<SeedResult> {
        match catch_unwind(AssertUnwindSafe(|| run_seed(cfg, &built, seed))) {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(e)) => Err(Error::Run {
                seed,
                message: e.to_string(),
            }),
            Err(panic) => Err(Error::Run {
                seed,
                message: panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into()),
            }),
        }
    };
    let results: Vec<Result<SeedResult>> = if jobs == 1 {
        seeds.iter().map(|&s| one(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(AggregateResult {
        config: cfg.clone(),
        env_description: built.describe(),
        x_unit: x_unit(cfg),
        runs,
    })
}
