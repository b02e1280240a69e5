//! The learning loop shared by every algorithm variant.
//!
//! Q-Rex, Q-RexDaRe, EpiQ-Rex, vanilla Q-learning and the replay baselines
//! differ only in four switches: replay order, target mode (frozen per outer
//! loop or live), data mode (fresh or reused) and how buffer outputs are
//! combined (last iterate or average). [`AlgoConfig`] carries the switches;
//! the `*_run` functions check the preconditions of each named variant and
//! hand over to one runner.

mod config;
mod pass;
mod runner;

pub use config::{AlgoConfig, Combine, DataMode, TargetMode};
pub use pass::{inner_buffer_pass, PassOutput, DIVERGENCE_LIMIT};
pub use runner::{
    epiqrex_run, otl_replay_q_run, qrex_run, qrexdare_run, run_observed, vanilla_q_run, Checkpoint, DataPolicy,
    Evaluator, Metrics, Observer, RunTrace, UpdateEvent,
};

use crate::error::{Error, Result};

/// Combines the `N` buffer outputs of an outer loop: the last one under
/// Option I, their mean under Option II.
pub fn combine_iterates(option: Combine, outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let last = outputs
        .last()
        .ok_or_else(|| Error::config("cannot combine an empty set of iterates"))?;
    match option {
        Combine::OptionI => Ok(last.clone()),
        Combine::OptionII => {
            let d = last.len();
            let mut mean = vec![0.0; d];
            for w in outputs {
                if w.len() != d {
                    return Err(Error::Dimension {
                        expected: d,
                        got: w.len(),
                    });
                }
                for (m, x) in mean.iter_mut().zip(w) {
                    *m += x;
                }
            }
            let n = outputs.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            Ok(mean)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_examples() {
        let single = vec![vec![0.3, -1.0]];
        assert_eq!(combine_iterates(Combine::OptionI, &single).unwrap(), single[0]);
        assert_eq!(combine_iterates(Combine::OptionII, &single).unwrap(), single[0]);
        let pair = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(combine_iterates(Combine::OptionII, &pair).unwrap(), vec![0.5, 0.5]);
        let seq = vec![vec![1.0], vec![2.0], vec![7.0]];
        assert_eq!(combine_iterates(Combine::OptionI, &seq).unwrap(), vec![7.0]);
        assert!(combine_iterates(Combine::OptionI, &[]).is_err());
    }
}
