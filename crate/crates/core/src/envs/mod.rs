//! Benchmark environments.
//!
//! GridWorld and the random walk are finite MDPs built on [`tabular::TabularEnv`];
//! Mountain Car, Baird's counter-example and the linear dynamical system
//! have their own state types.

pub mod baird;
pub mod gridworld;
pub mod lds;
pub mod mountain_car;
pub mod random_walk;
pub mod tabular;

pub use baird::{Baird, BairdEmbedding};
pub use lds::Lds;
pub use mountain_car::{CarState, MountainCar};
pub use tabular::{RewardNoise, TabularEnv, TabularFeatures};
