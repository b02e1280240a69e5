//! Q-learning with online target learning (OTL) and reverse experience
//! replay (RER).
//!
//! The crate is organised around a single learning loop that covers Q-Rex,
//! Q-RexDaRe, EpiQ-Rex, vanilla Q-learning and the experience-replay
//! baselines as points of one configuration space ([`algorithms`]).
//! Exact tabular computations used as ground truth live in [`oracle`],
//! the benchmark environments in [`envs`], and the experiment driver,
//! CSV output and identity checks in [`harness`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod replay;

pub use error::{Error, Result};
pub use mdp::{Environment, FeatureMap, Phi, TabularModel, TransitionSample};

/// Deterministic RNG used everywhere a seed is involved.
pub type SeedRng = rand_chacha::ChaCha8Rng;

/// Builds the run RNG from a seed.
pub fn seeded_rng(seed: u64) -> SeedRng {
    use rand::SeedableRng;
    SeedRng::seed_from_u64(seed)
}
