//! Buffer layout over a sample stream and buffer traversal orders.
//!
//! Indices in this module are 1-based to match the usual `t(k, j, i)`
//! layout: with `S = B + u`, element `i` of buffer `j` in outer loop `k`
//! is stream element `N·S·(k−1) + S·(j−1) + i`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Layout of `K` outer loops of `N` buffers, each `B` used samples followed
/// by a gap of `u` discarded ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferPartition {
    pub outer_loops: usize,
    pub buffers_per_loop: usize,
    pub buffer_size: usize,
    pub gap: usize,
}

impl BufferPartition {
    pub fn new(outer_loops: usize, buffers_per_loop: usize, buffer_size: usize, gap: usize) -> Result<Self> {
        if outer_loops == 0 || buffers_per_loop == 0 || buffer_size == 0 {
            return Err(Error::config(format!(
                "K, N and B must be positive (got K={outer_loops}, N={buffers_per_loop}, B={buffer_size})"
            )));
        }
        Ok(BufferPartition {
            outer_loops,
            buffers_per_loop,
            buffer_size,
            gap,
        })
    }

    /// `S = B + u`.
    pub fn stride(&self) -> usize {
        self.buffer_size + self.gap
    }

    /// `T = K·N·S`.
    pub fn total(&self) -> usize {
        self.outer_loops * self.buffers_per_loop * self.stride()
    }

    /// Stream index `t(k, j, i)`, all arguments 1-based.
    pub fn time_index(&self, k: usize, j: usize, i: usize) -> usize {
        debug_assert!((1..=self.outer_loops).contains(&k));
        debug_assert!((1..=self.buffers_per_loop).contains(&j));
        debug_assert!((1..=self.stride()).contains(&i));
        let s = self.stride();
        self.buffers_per_loop * s * (k - 1) + s * (j - 1) + i
    }

    /// Whether stream index `t` (1-based) falls in a gap.
    pub fn is_gap(&self, t: usize) -> bool {
        (t - 1) % self.stride() >= self.buffer_size
    }

    /// All stream indices consumed by updates, in stream order.
    pub fn used_indices(&self) -> Vec<usize> {
        (1..=self.total()).filter(|&t| !self.is_gap(t)).collect()
    }

    pub fn gap_indices(&self) -> Vec<usize> {
        (1..=self.total()).filter(|&t| self.is_gap(t)).collect()
    }
}

/// Order in which a buffer's transitions are replayed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayOrder {
    /// Positions `B, B−1, …, 1`.
    Reverse,
    /// Positions `1, …, B` (streaming order).
    Forward,
    /// A uniformly random permutation of `1..=B`.
    UniformRandomPermutation,
}

/// Traversal of a buffer of `len` transitions as 1-based positions.
pub fn iteration_order<R: Rng + ?Sized>(len: usize, order: ReplayOrder, rng: &mut R) -> Vec<usize> {
    match order {
        ReplayOrder::Reverse => (1..=len).rev().collect(),
        ReplayOrder::Forward => (1..=len).collect(),
        ReplayOrder::UniformRandomPermutation => {
            let mut p: Vec<usize> = (1..=len).collect();
            p.shuffle(rng);
            p
        }
    }
}

/// `len` positions drawn uniformly with replacement (classical ER sampling).
pub fn sample_with_replacement<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(1..=len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;

    #[test]
    fn partition_examples() {
        let p = BufferPartition::new(1, 1, 2, 1).unwrap();
        assert_eq!(p.total(), 3);
        assert_eq!(p.used_indices(), vec![1, 2]);
        assert_eq!(p.gap_indices(), vec![3]);

        let p = BufferPartition::new(2, 2, 2, 0).unwrap();
        assert_eq!(p.time_index(2, 1, 1), 5);

        let p = BufferPartition::new(1, 3, 4, 2).unwrap();
        assert_eq!(p.total(), 18);
        assert_eq!(p.gap_indices(), vec![5, 6, 11, 12, 17, 18]);
    }

    #[test]
    fn partition_rejects_zero() {
        assert!(BufferPartition::new(0, 1, 1, 0).is_err());
        assert!(BufferPartition::new(1, 0, 1, 0).is_err());
        assert!(BufferPartition::new(1, 1, 0, 0).is_err());
    }

    #[test]
    fn order_examples() {
        let mut rng = seeded_rng(0);
        assert_eq!(iteration_order(3, ReplayOrder::Reverse, &mut rng), vec![3, 2, 1]);
        assert_eq!(iteration_order(3, ReplayOrder::Forward, &mut rng), vec![1, 2, 3]);
        for order in [
            ReplayOrder::Reverse,
            ReplayOrder::Forward,
            ReplayOrder::UniformRandomPermutation,
        ] {
            assert_eq!(iteration_order(1, order, &mut rng), vec![1]);
        }
    }

    #[test]
    fn singleton_permutation_consumes_no_randomness() {
        use rand::RngCore;
        let mut a = seeded_rng(4);
        let mut b = seeded_rng(4);
        iteration_order(1, ReplayOrder::UniformRandomPermutation, &mut a);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn permutation_first_position_is_uniform() {
        // chi-square, 4 degrees of freedom; 1% critical value 13.277
        let draws = 100_000;
        let mut counts = [0usize; 5];
        let mut rng = seeded_rng(2024);
        for _ in 0..draws {
            let p = iteration_order(5, ReplayOrder::UniformRandomPermutation, &mut rng);
            counts[p[0] - 1] += 1;
        }
        let expected = draws as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.277, "chi2 = {chi2}, counts = {counts:?}");
    }

    proptest! {
        #[test]
        fn partition_covers_stream_exactly(k in 1usize..4, n in 1usize..4, b in 1usize..6, u in 0usize..4) {
            let p = BufferPartition::new(k, n, b, u).unwrap();
            let mut hit = vec![0u8; p.total() + 1];
            for kk in 1..=k {
                for jj in 1..=n {
                    for ii in 1..=p.stride() {
                        let t = p.time_index(kk, jj, ii);
                        hit[t] += 1;
                        prop_assert_eq!(p.is_gap(t), ii > b);
                    }
                }
            }
            prop_assert_eq!(hit[0], 0);
            prop_assert!(hit[1..].iter().all(|&h| h == 1));
            prop_assert_eq!(p.used_indices().len(), k * n * b);
        }

        #[test]
        fn random_order_is_permutation(len in 1usize..50, seed in any::<u64>()) {
            let mut p = iteration_order(len, ReplayOrder::UniformRandomPermutation, &mut seeded_rng(seed));
            p.sort_unstable();
            prop_assert_eq!(p, (1..=len).collect::<Vec<_>>());
        }
    }
}
