//! Mountain Car with grid tile coding.
//!
//! Each action owns a block of `tilings · tiles²` binary features. Tiling
//! `m` is shifted by `m / tilings` of a tile in both dimensions, and tile
//! indices are clamped into `[0, tiles)` so the extra boundary tile folds
//! into the last one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Environment, FeatureMap, Phi, TransitionSample};

pub const X_MIN: f64 = -1.2;
pub const X_MAX: f64 = 0.5;
pub const V_MIN: f64 = -0.07;
pub const V_MAX: f64 = 0.07;
pub const NUM_ACTIONS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarState {
    pub x: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MountainCar {
    tilings: usize,
    tiles: usize,
}

impl Default for MountainCar {
    fn default() -> Self {
        MountainCar { tilings: 4, tiles: 4 }
    }
}

impl MountainCar {
    pub fn new(tilings: usize, tiles: usize) -> Result<Self> {
        if tilings == 0 || tiles == 0 {
            return Err(Error::config("tilings and tiles must be positive"));
        }
        Ok(MountainCar { tilings, tiles })
    }

    pub fn tilings(&self) -> usize {
        self.tilings
    }

    pub fn tiles(&self) -> usize {
        self.tiles
    }

    /// Deterministic dynamics; `action` 0, 1, 2 is thrust −1, 0, +1.
    pub fn dynamics(state: CarState, action: usize) -> (CarState, bool) {
        let thrust = action as f64 - 1.0;
        let mut v = (state.v + 0.001 * thrust - 0.0025 * (3.0 * state.x).cos()).clamp(V_MIN, V_MAX);
        let mut x = state.x + v;
        if x <= X_MIN {
            x = X_MIN;
            v = 0.0;
        }
        if x >= X_MAX {
            return (CarState { x: X_MAX, v }, true);
        }
        (CarState { x, v }, false)
    }

    /// Active tile of tiling `m` for `state`.
    fn tile(&self, m: usize, state: &CarState) -> usize {
        let n = self.tiles as f64;
        let shift = m as f64 / self.tilings as f64;
        let fx = (state.x - X_MIN) / (X_MAX - X_MIN) * n + shift;
        let fv = (state.v - V_MIN) / (V_MAX - V_MIN) * n + shift;
        let ix = (fx.floor().max(0.0) as usize).min(self.tiles - 1);
        let iv = (fv.floor().max(0.0) as usize).min(self.tiles - 1);
        ix * self.tiles + iv
    }

    /// `grid × grid` (position, velocity) points crossed with every action,
    /// used to evaluate sup-norms over the continuum.
    pub fn eval_grid(grid: usize) -> Vec<(CarState, usize)> {
        let mut out = Vec::with_capacity(grid * grid * NUM_ACTIONS);
        for i in 0..grid {
            for j in 0..grid {
                let x = X_MIN + (X_MAX - X_MIN) * i as f64 / (grid - 1).max(1) as f64;
                let v = V_MIN + (V_MAX - V_MIN) * j as f64 / (grid - 1).max(1) as f64;
                for a in 0..NUM_ACTIONS {
                    out.push((CarState { x, v }, a));
                }
            }
        }
        out
    }
}

impl FeatureMap for MountainCar {
    type State = CarState;

    fn dim(&self) -> usize {
        NUM_ACTIONS * self.tilings * self.tiles * self.tiles
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn embed(&self, state: &CarState, action: usize) -> Phi {
        let per_tiling = self.tiles * self.tiles;
        let block = action * self.tilings * per_tiling;
        (0..self.tilings)
            .map(|m| (block + m * per_tiling + self.tile(m, state), 1.0))
            .collect()
    }
}

impl Environment for MountainCar {
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> CarState {
        CarState {
            x: rng.random_range(-0.6..-0.4),
            v: 0.0,
        }
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &CarState,
        action: usize,
        _rng: &mut R,
    ) -> Result<TransitionSample<CarState>> {
        if action >= NUM_ACTIONS {
            return Err(Error::InvalidAction {
                action,
                num_actions: NUM_ACTIONS,
            });
        }
        let (next, done) = Self::dynamics(*state, action);
        Ok(TransitionSample {
            state: *state,
            action,
            reward: -1.0,
            next_state: next,
            next_terminal: done,
        })
    }

    fn is_episodic(&self) -> bool {
        true
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("tilings".into(), self.tilings.to_string()),
            ("tiles".into(), format!("{0}x{0}", self.tiles)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_step() {
        let (next, done) = MountainCar::dynamics(CarState { x: 0.0, v: 0.0 }, 1);
        assert!(!done);
        assert_abs_diff_eq!(next.v, -0.0025, epsilon = 1e-15);
        assert_abs_diff_eq!(next.x, -0.0025, epsilon = 1e-15);
    }

    #[test]
    fn left_wall_zeroes_velocity() {
        let (next, _) = MountainCar::dynamics(CarState { x: -1.19, v: -0.07 }, 0);
        assert_eq!(next.x, X_MIN);
        assert_eq!(next.v, 0.0);
    }

    #[test]
    fn reaching_goal_terminates() {
        let env = MountainCar::default();
        let t = env.step(&CarState { x: 0.49, v: 0.05 }, 2, &mut seeded_rng(0)).unwrap();
        assert!(t.next_terminal);
        assert_eq!(t.reward, -1.0);
    }

    #[test]
    fn reset_has_zero_velocity() {
        let env = MountainCar::default();
        let mut rng = seeded_rng(5);
        for _ in 0..1000 {
            let s = env.reset(&mut rng);
            assert_eq!(s.v, 0.0);
            assert!((-0.6..-0.4).contains(&s.x));
        }
    }

    #[test]
    fn invalid_action() {
        let env = MountainCar::default();
        assert!(env.step(&CarState { x: -0.5, v: 0.0 }, 3, &mut seeded_rng(0)).is_err());
    }

    proptest! {
        #[test]
        fn four_active_tiles_in_action_block(x in X_MIN..X_MAX, v in V_MIN..V_MAX, a in 0usize..3) {
            let env = MountainCar::default();
            prop_assert_eq!(env.dim(), 192);
            let phi = env.embed(&CarState { x, v }, a);
            prop_assert_eq!(phi.len(), 4);
            let norm: f64 = phi.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            prop_assert_eq!(norm, 2.0);
            let mut idx: Vec<usize> = phi.iter().map(|&(i, _)| i).collect();
            idx.dedup();
            prop_assert_eq!(idx.len(), 4);
            prop_assert!(idx.iter().all(|&i| (a * 64..(a + 1) * 64).contains(&i)));
        }

        #[test]
        fn dynamics_are_deterministic(x in X_MIN..X_MAX, v in V_MIN..V_MAX, a in 0usize..3) {
            let s = CarState { x, v };
            prop_assert_eq!(MountainCar::dynamics(s, a), MountainCar::dynamics(s, a));
        }

        #[test]
        fn features_constant_within_shared_tile(
            x in X_MIN..X_MAX, v in V_MIN..V_MAX, fx in 0.0f64..1.0, fv in 0.0f64..1.0,
        ) {
            // the common refinement of all tilings has cells of width 1/16 tile
            let env = MountainCar::default();
            let cell_x = (X_MAX - X_MIN) / 16.0;
            let cell_v = (V_MAX - V_MIN) / 16.0;
            let cx = ((x - X_MIN) / cell_x).floor();
            let cv = ((v - V_MIN) / cell_v).floor();
            let a = CarState { x: X_MIN + (cx + 0.1) * cell_x, v: V_MIN + (cv + 0.1) * cell_v };
            let b = CarState { x: X_MIN + (cx + 0.1 + 0.8 * fx) * cell_x, v: V_MIN + (cv + 0.1 + 0.8 * fv) * cell_v };
            prop_assert_eq!(env.embed(&a, 1), env.embed(&b, 1));
        }
    }
}
