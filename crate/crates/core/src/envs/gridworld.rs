//! 5×5 grid with two teleporting cells.
//!
//! States are `row * 5 + col`; actions are north, south, east, west.
//! Any action in cell A = (0, 1) moves to (4, 1) with reward 10, any action
//! in B = (0, 3) moves to (2, 3) with reward 5. Bumping into the border
//! costs 1 and leaves the agent in place.

use crate::mdp::TabularModel;

use super::tabular::{RewardNoise, TabularEnv};

pub const SIZE: usize = 5;
pub const NUM_STATES: usize = SIZE * SIZE;
pub const NUM_ACTIONS: usize = 4;

pub const A_STATE: usize = 1;
pub const A_TARGET: usize = 4 * SIZE + 1;
pub const B_STATE: usize = 3;
pub const B_TARGET: usize = 2 * SIZE + 3;

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_NOISE: f64 = 0.5;

/// Deterministic successor and expected reward.
pub fn transition(s: usize, action: usize) -> (usize, f64) {
    if s == A_STATE {
        return (A_TARGET, 10.0);
    }
    if s == B_STATE {
        return (B_TARGET, 5.0);
    }
    let (row, col) = ((s / SIZE) as isize, (s % SIZE) as isize);
    let (dr, dc) = match action {
        0 => (-1, 0),
        1 => (1, 0),
        2 => (0, 1),
        3 => (0, -1),
        _ => panic!("gridworld action {action} out of range"),
    };
    let (nr, nc) = (row + dr, col + dc);
    if nr < 0 || nc < 0 || nr >= SIZE as isize || nc >= SIZE as isize {
        (s, -1.0)
    } else {
        ((nr as usize) * SIZE + nc as usize, 0.0)
    }
}

/// The noiseless model.
pub fn model(gamma: f64) -> TabularModel {
    let mut p = vec![0.0; NUM_STATES * NUM_ACTIONS * NUM_STATES];
    let mut r = vec![0.0; NUM_STATES * NUM_ACTIONS];
    for s in 0..NUM_STATES {
        for a in 0..NUM_ACTIONS {
            let (next, reward) = transition(s, a);
            let idx = s * NUM_ACTIONS + a;
            p[idx * NUM_STATES + next] = 1.0;
            r[idx] = reward;
        }
    }
    TabularModel::new(NUM_STATES, NUM_ACTIONS, p, r, gamma).expect("gridworld model is valid")
}

/// Continuing environment with `U[−noise, noise]` reward noise.
pub fn env(gamma: f64, noise: f64) -> TabularEnv {
    let env = TabularEnv::new(model(gamma));
    if noise > 0.0 {
        env.with_noise(RewardNoise::Uniform { half_width: noise })
    } else {
        env
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Environment;
    use crate::seeded_rng;

    #[test]
    fn special_cells_jump_with_bonus() {
        let env = env(DEFAULT_GAMMA, DEFAULT_NOISE);
        let mut rng = seeded_rng(0);
        for a in 0..NUM_ACTIONS {
            let t = env.step(&A_STATE, a, &mut rng).unwrap();
            assert_eq!(t.next_state, A_TARGET);
            assert!((9.5..=10.5).contains(&t.reward));
            let t = env.step(&B_STATE, a, &mut rng).unwrap();
            assert_eq!(t.next_state, B_TARGET);
            assert!((4.5..=5.5).contains(&t.reward));
        }
    }

    #[test]
    fn border_and_interior_moves() {
        assert_eq!(transition(0, 0), (0, -1.0));
        assert_eq!(transition(0, 3), (0, -1.0));
        assert_eq!(transition(0, 1), (5, 0.0));
        assert_eq!(transition(24, 1), (24, -1.0));
        assert_eq!(transition(12, 2), (13, 0.0));
        let m = model(0.9);
        assert_eq!(m.reward(A_STATE, 0), 10.0);
        assert_eq!(m.reward(B_STATE, 3), 5.0);
    }

    #[test]
    fn sampled_rewards_match_model_means() {
        let env = env(DEFAULT_GAMMA, DEFAULT_NOISE);
        let model = model(DEFAULT_GAMMA);
        let mut rng = seeded_rng(77);
        let n = 100_000;
        let sigma = (1.0f64 / 12.0).sqrt();
        for (s, a) in [(A_STATE, 0), (B_STATE, 2), (0, 0), (12, 1), (24, 2)] {
            let mean = (0..n).map(|_| env.step(&s, a, &mut rng).unwrap().reward).sum::<f64>() / n as f64;
            assert!(
                (mean - model.reward(s, a)).abs() < 3.0 * sigma / (n as f64).sqrt(),
                "({s},{a}) mean {mean}"
            );
        }
    }
}
