//! Episodic random walk on a line with state aggregation.
//!
//! Non-terminal states are `1..=n`; `0` and `n + 1` are the left and right
//! terminals. Action 0 steps left, action 1 steps right. Entering the right
//! terminal pays 1, everything else pays 0. Features are one-hot over
//! `(group, action)` with groups of consecutive states.

use crate::mdp::TabularModel;

use super::tabular::{TabularEnv, TabularFeatures};

pub const DEFAULT_STATES: usize = 100;
pub const DEFAULT_GROUPS: usize = 10;
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Absorbing-terminal model over `n + 2` states.
pub fn model(n: usize, gamma: f64) -> TabularModel {
    let ns = n + 2;
    let mut p = vec![0.0; ns * 2 * ns];
    let mut r = vec![0.0; ns * 2];
    for s in 0..ns {
        for a in 0..2 {
            let idx = s * 2 + a;
            let next = if s == 0 || s == n + 1 {
                s
            } else if a == LEFT {
                s - 1
            } else {
                s + 1
            };
            p[idx * ns + next] = 1.0;
            if s == n && a == RIGHT {
                r[idx] = 1.0;
            }
        }
    }
    TabularModel::new(ns, 2, p, r, gamma).expect("random walk model is valid")
}

/// Walk with `n` states aggregated into `groups` equal groups.
pub fn env(n: usize, groups: usize, gamma: f64) -> TabularEnv {
    assert!(
        groups > 0 && n.is_multiple_of(groups),
        "groups must divide the state count"
    );
    TabularEnv::new(model(n, gamma))
        .with_terminals(&[0, n + 1])
        .with_starts((1..=n).collect())
        .with_features(TabularFeatures::Aggregated {
            first_state: 1,
            group_size: n / groups,
            groups,
        })
}
