//! Seeded batch schedules: each epoch is an independent permutation of the
//! example indices, derived statelessly from (seed, epoch) so a schedule can
//! be reconstructed at any point — in particular when resuming from a
//! checkpoint.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSchedule {
    seed: u64,
    batch_size: usize,
    num_examples: usize,
    epoch: u64,
    cursor: usize,
    #[serde(skip)]
    perm: Vec<usize>,
}

impl BatchSchedule {
    pub fn new(num_examples: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if num_examples == 0 {
            return Err(OptimError::Config("schedule: empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(OptimError::Config("schedule: batch size zero".into()));
        }
        Ok(BatchSchedule {
            seed,
            batch_size,
            num_examples,
            epoch: 0,
            cursor: 0,
            perm: Vec::new(),
        })
    }

    /// The permutation for a given epoch, independent of any schedule state.
    fn permutation(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch.wrapping_add(1)); // stream 0 reserved for other draws
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        perm
    }

    fn ensure_perm(&mut self) {
        if self.perm.len() != self.num_examples {
            self.perm = Self::permutation(self.seed, self.epoch, self.num_examples);
        }
    }

    /// Next batch of at most `batch_size` indices; the final batch of an
    /// epoch may be smaller. Rolls over into a freshly shuffled epoch when
    /// exhausted.
    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.num_examples {
            self.epoch += 1;
            self.cursor = 0;
            self.perm.clear();
        }
        self.ensure_perm();
        let end = (self.cursor + self.batch_size).min(self.num_examples);
        let batch = self.perm[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }

    /// Zero-based epoch the next batch will come from.
    pub fn epoch(&self) -> u64 {
        if self.cursor >= self.num_examples {
            self.epoch + 1
        } else {
            self.epoch
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.num_examples.div_ceil(self.batch_size)
    }

    pub fn num_examples(&self) -> usize {
        self.num_examples
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn batch_sizes_4_4_2() {
        let mut s = BatchSchedule::new(10, 4, 7).unwrap();
        assert_eq!(s.batches_per_epoch(), 3);
        let sizes: Vec<usize> = (0..3).map(|_| s.next_batch().len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn epoch_union_is_full_index_set() {
        let mut s = BatchSchedule::new(23, 5, 3).unwrap();
        let mut seen = BTreeSet::new();
        for _ in 0..s.batches_per_epoch() {
            for i in s.next_batch() {
                assert!(seen.insert(i), "duplicate index {i}");
            }
        }
        assert_eq!(seen, (0..23).collect());
    }

    #[test]
    fn same_seed_same_schedule() {
        let mut a = BatchSchedule::new(12, 5, 99).unwrap();
        let mut b = BatchSchedule::new(12, 5, 99).unwrap();
        for _ in 0..7 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }

    #[test]
    fn epochs_reshuffle() {
        let mut s = BatchSchedule::new(64, 64, 5).unwrap();
        let e0 = s.next_batch();
        let e1 = s.next_batch();
        assert_ne!(e0, e1, "consecutive epochs should differ");
        // Stateless derivation: a fresh schedule advanced to epoch 1 agrees.
        let mut fresh = BatchSchedule::new(64, 64, 5).unwrap();
        assert_eq!(fresh.next_batch(), e0);
        assert_eq!(fresh.next_batch(), e1);
    }

    #[test]
    fn serde_resume_reproduces_schedule() {
        let mut s = BatchSchedule::new(17, 4, 11).unwrap();
        for _ in 0..3 {
            s.next_batch();
        }
        let json = serde_json::to_string(&s).unwrap();
        let mut restored: BatchSchedule = serde_json::from_str(&json).unwrap();
        for _ in 0..6 {
            assert_eq!(s.next_batch(), restored.next_batch());
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(BatchSchedule::new(0, 4, 1).is_err());
        assert!(BatchSchedule::new(4, 0, 1).is_err());
    }
}
