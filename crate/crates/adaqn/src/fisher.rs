//! Fisher-information curvature estimates: the FIFO of recent stochastic
//! gradients (accumulated Fisher matrix, aFIM), the fresh per-example
//! variant (empirical Fisher, eFIM), and the accumulated-squared-gradient
//! diagonal used to seed the two-loop recursion.
//!
//! The Fisher matrices are never materialized: `y = (1/|F|) Σ g_i (g_iᵀ s)`
//! is computed as one dot product and one axpy per stored gradient.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};
use crate::lbfgs::DiagonalScaling;
use crate::problems::StochasticObjective;
use crate::vecmath;

/// One stored stochastic gradient together with the size of the mini-batch
/// it was averaged over.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FifoEntry {
    pub gradient: Vec<f64>,
    pub batch_size: usize,
}

/// FIFO container of recent stochastic gradients; the rank-one terms of the
/// accumulated Fisher matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientFifo {
    entries: VecDeque<FifoEntry>,
    capacity: usize,
}

impl GradientFifo {
    pub fn new(capacity: usize) -> Self {
        GradientFifo {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Flush all entries (step rejection clears the FIFO together with the
    /// L-BFGS memory).
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Store a gradient, evicting the oldest entry when full. A capacity of
    /// zero turns the container into a no-op.
    pub fn push(&mut self, gradient: Vec<f64>, batch_size: usize) -> Result<()> {
        if self.capacity == 0 {
            return Ok(());
        }
        if let Some(front) = self.entries.front() {
            if front.gradient.len() != gradient.len() {
                return Err(OptimError::DimensionMismatch {
                    context: "fifo push",
                    expected: front.gradient.len(),
                    actual: gradient.len(),
                });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(FifoEntry {
            gradient,
            batch_size,
        });
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &FifoEntry> {
        self.entries.iter()
    }
}

/// Per-coordinate running sum of squared stochastic gradients. Entries only
/// grow; rejections do not reset it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquaredGradAccumulator {
    pub sums: Vec<f64>,
}

impl SquaredGradAccumulator {
    pub fn new(n: usize) -> Self {
        SquaredGradAccumulator { sums: vec![0.0; n] }
    }

    pub fn accumulate(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.sums.len() {
            return Err(OptimError::DimensionMismatch {
                context: "accumulator",
                expected: self.sums.len(),
                actual: g.len(),
            });
        }
        if !vecmath::all_finite(g) {
            return Err(OptimError::numerical("accumulate: nonfinite gradient"));
        }
        vecmath::accumulate_squares(&mut self.sums, g);
        Ok(())
    }
}

/// The Adagrad-style diagonal seed: diag_i = 1/sqrt(sums_i + eps_scale).
pub fn adagrad_scaling(acc: &SquaredGradAccumulator, eps_scale: f64) -> Result<DiagonalScaling> {
    if eps_scale < 0.0 {
        return Err(OptimError::Config("eps_scale must be nonnegative".into()));
    }
    DiagonalScaling::new(vecmath::rsqrt_shifted(&acc.sums, eps_scale))
}

/// Accumulated-Fisher matrix-vector product:
/// `y = (1/|F|) Σ_i g_i (g_iᵀ s)` over the FIFO contents.
pub fn afim_matvec(fifo: &GradientFifo, s: &[f64]) -> Result<Vec<f64>> {
    let count = fifo.len();
    if count == 0 {
        return Err(OptimError::EmptyFifo);
    }
    let mut y = vec![0.0; s.len()];
    for entry in fifo.entries() {
        if entry.gradient.len() != s.len() {
            return Err(OptimError::DimensionMismatch {
                context: "afim matvec",
                expected: s.len(),
                actual: entry.gradient.len(),
            });
        }
        let c = vecmath::dot(&entry.gradient, s);
        vecmath::axpy(&mut y, c, &entry.gradient);
    }
    vecmath::scale(&mut y, 1.0 / count as f64);
    Ok(y)
}

/// Empirical-Fisher matrix-vector product: per-example gradients evaluated
/// fresh at `w` over `batch`, then `y = (1/|batch|) Σ g_i (g_iᵀ s)`.
pub fn efim_matvec(
    objective: &dyn StochasticObjective,
    batch: &[usize],
    w: &[f64],
    s: &[f64],
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(OptimError::Config("efim: empty batch".into()));
    }
    let mut y = vec![0.0; s.len()];
    for &i in batch {
        let g = objective.per_example_gradient(w, i)?;
        let c = vecmath::dot(&g, s);
        vecmath::axpy(&mut y, c, &g);
    }
    vecmath::scale(&mut y, 1.0 / batch.len() as f64);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{rel_err, QuadraticProblem, StochasticObjective};

    fn fifo_of(grads: &[Vec<f64>]) -> GradientFifo {
        let mut fifo = GradientFifo::new(grads.len().max(1));
        for g in grads {
            fifo.push(g.clone(), 1).unwrap();
        }
        fifo
    }

    #[test]
    fn adagrad_scaling_hand_values() {
        let acc = SquaredGradAccumulator {
            sums: vec![9.0, 16.0],
        };
        let d = adagrad_scaling(&acc, 0.0).unwrap();
        assert_eq!(d.as_slice(), &[1.0 / 3.0, 0.25]);

        let zeros = SquaredGradAccumulator::new(3);
        let d = adagrad_scaling(&zeros, 1e-4).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 100.0));

        let acc = SquaredGradAccumulator { sums: vec![9.0] };
        let d = adagrad_scaling(&acc, 1e-4).unwrap();
        assert!((d.as_slice()[0] - 1.0 / 9.0001f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adagrad_scaling_rejects_zero_sums_without_eps() {
        let zeros = SquaredGradAccumulator::new(2);
        assert!(adagrad_scaling(&zeros, 0.0).is_err());
    }

    #[test]
    fn afim_hand_example() {
        let fifo = fifo_of(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let y = afim_matvec(&fifo, &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![0.5, 2.0]);
    }

    #[test]
    fn afim_orthogonal_annihilates() {
        let fifo = fifo_of(&[vec![1.0, 1.0, 0.0]]);
        let y = afim_matvec(&fifo, &[1.0, -1.0, 5.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn afim_eigenvector_case() {
        let g = vec![1.0, 2.0, -1.0];
        let fifo = fifo_of(&[g.clone()]);
        let y = afim_matvec(&fifo, &g).unwrap();
        let gg = 6.0; // 1 + 4 + 1
        for i in 0..3 {
            assert!((y[i] - gg * g[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn afim_matches_explicit_matrix() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let n = rng.gen_range(2..=12);
            let k = rng.gen_range(1..=20);
            let grads: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // Explicit (1/k) Σ g gᵀ.
            let mut mat = vec![vec![0.0; n]; n];
            for g in &grads {
                for i in 0..n {
                    for j in 0..n {
                        mat[i][j] += g[i] * g[j] / k as f64;
                    }
                }
            }
            let expect: Vec<f64> = mat
                .iter()
                .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum())
                .collect();
            let y = afim_matvec(&fifo_of(&grads), &s).unwrap();
            assert!(
                rel_err(&y, &expect) <= 1e-12,
                "trial {trial}: {}",
                rel_err(&y, &expect)
            );
        }
    }

    #[test]
    fn empty_fifo_signals_no_curvature() {
        let fifo = GradientFifo::new(4);
        assert!(matches!(
            afim_matvec(&fifo, &[1.0]),
            Err(OptimError::EmptyFifo)
        ));
    }

    #[test]
    fn fifo_evicts_oldest_and_zero_capacity_drops() {
        let mut fifo = GradientFifo::new(2);
        fifo.push(vec![1.0], 4).unwrap();
        fifo.push(vec![2.0], 4).unwrap();
        fifo.push(vec![3.0], 4).unwrap();
        assert_eq!(fifo.len(), 2);
        let grads: Vec<f64> = fifo.entries().map(|e| e.gradient[0]).collect();
        assert_eq!(grads, vec![2.0, 3.0]);

        let mut none = GradientFifo::new(0);
        none.push(vec![1.0], 4).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn accumulator_grows_monotonically_and_rejects_nan() {
        let mut acc = SquaredGradAccumulator::new(2);
        acc.accumulate(&[3.0, -1.0]).unwrap();
        assert_eq!(acc.sums, vec![9.0, 1.0]);
        acc.accumulate(&[0.0, 2.0]).unwrap();
        assert_eq!(acc.sums, vec![9.0, 5.0]);
        assert!(acc.accumulate(&[f64::NAN, 0.0]).is_err());
        assert_eq!(acc.sums, vec![9.0, 5.0], "failed accumulate must not mutate");
    }

    #[test]
    fn efim_single_example_equals_afim() {
        let p = QuadraticProblem::with_condition(6, 100.0, 40, 0.1, 5).unwrap();
        let w: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let s: Vec<f64> = (0..6).map(|i| 1.0 - 0.3 * i as f64).collect();
        let g = p.per_example_gradient(&w, 7).unwrap();
        let fifo = fifo_of(&[g]);
        let via_afim = afim_matvec(&fifo, &s).unwrap();
        let via_efim = efim_matvec(&p, &[7], &w, &s).unwrap();
        assert!(rel_err(&via_efim, &via_afim) <= 1e-15);
    }

    #[test]
    fn efim_matches_explicit_matrix_on_quadratic() {
        let p = QuadraticProblem::with_condition(5, 50.0, 20, 0.2, 9).unwrap();
        let w: Vec<f64> = (0..5).map(|i| 0.2 * (i as f64) - 0.3).collect();
        let s: Vec<f64> = (0..5).map(|i| (i as f64).sin()).collect();
        let batch: Vec<usize> = (0..20).collect();
        let n = 5;
        let mut mat = vec![vec![0.0; n]; n];
        for &i in &batch {
            let g = p.per_example_gradient(&w, i).unwrap();
            for a in 0..n {
                for b in 0..n {
                    mat[a][b] += g[a] * g[b] / batch.len() as f64;
                }
            }
        }
        let expect: Vec<f64> = mat
            .iter()
            .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum())
            .collect();
        let y = efim_matvec(&p, &batch, &w, &s).unwrap();
        assert!(rel_err(&y, &expect) <= 1e-12, "{}", rel_err(&y, &expect));
    }

    #[test]
    fn efim_zero_direction_gives_zero() {
        let p = QuadraticProblem::with_condition(4, 10.0, 10, 0.0, 2).unwrap();
        let y = efim_matvec(&p, &[0, 1, 2], &[0.5; 4], &[0.0; 4]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }
}
