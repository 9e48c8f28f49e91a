use crate::rng::SplitMix64;

/// Seeded mini-batch index generator for one dataset.
#[derive(Clone, Debug)]
pub struct Batcher {
    n: usize,
    batch_size: usize,
    seed: u64,
}

impl Batcher {
    /// `batch_size` of 0 is treated as 1.
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        Batcher { n, batch_size: batch_size.max(1), seed }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    /// Fisher–Yates permutation of `0..n` for `epoch`, split into consecutive
    /// batches. The final batch may be short.
    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        SplitMix64::derive(self.seed, epoch).shuffle(&mut idx);
        idx.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn batch_sizes() {
        let b = Batcher::new(10, 4, 1).epoch(0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    }

    #[test]
    fn oversized_batch_is_one_permutation() {
        let b = Batcher::new(7, 100, 5).epoch(3);
        assert_eq!(b.len(), 1);
        let mut all = b[0].clone();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn reproducible_per_seed_and_epoch() {
        let b = Batcher::new(50, 8, 9);
        assert_eq!(b.epoch(2), b.epoch(2));
        assert_ne!(b.epoch(2), b.epoch(3));
        assert_ne!(b.epoch(2), Batcher::new(50, 8, 10).epoch(2));
    }

    proptest! {
        #[test]
        fn union_is_exact_index_set(n in 0usize..300, bs in 1usize..64, seed: u64, epoch: u64) {
            let batches = Batcher::new(n, bs, seed).epoch(epoch);
            let mut all: Vec<usize> = batches.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= bs));
        }
    }
}
