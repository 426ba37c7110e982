//! Curvature-pair storage and the L-BFGS two-loop recursion.
//!
//! The memory is a bounded FIFO of `(s, y, rho)` triples. A pair is admitted
//! only if it carries sufficient curvature (`s'y > eps_skip * s's`), which
//! keeps every stored pair usable by the recursion and the implied inverse
//! Hessian positive definite. The recursion seeds from a caller-provided
//! strictly positive diagonal, so the same code serves both the classical
//! scalar initialization and accumulated-gradient scalings.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};
use crate::vecmath;

/// Flat vector of all trainable parameters (the iterate).
pub type ParamVector = Vec<f64>;
/// Gradient with the same shape as [`ParamVector`].
pub type GradVector = Vec<f64>;

/// One `(s, y, rho)` triple entering the two-loop recursion.
///
/// `rho = 1 / (y's)` is fixed at admission time rather than recomputed in
/// the recursion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvaturePair {
    pub s: ParamVector,
    pub y: GradVector,
    pub rho: f64,
}

/// Bounded FIFO of curvature pairs; oldest pair is evicted on overflow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbfgsMemory {
    pairs: VecDeque<CurvaturePair>,
    capacity: usize,
}

/// Outcome of a pair admission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Stored,
    Skipped,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        LbfgsMemory {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    /// Attempt to admit a pair. The pair is stored (evicting the oldest one
    /// if the memory is full) only when `s'y > eps_skip * s's`; otherwise the
    /// memory is left unchanged. Nonfinite inputs are an error and nothing is
    /// stored.
    pub fn push_pair(&mut self, s: ParamVector, y: GradVector, eps_skip: f64) -> Result<PushOutcome> {
        if s.len() != y.len() {
            return Err(OptimError::DimensionMismatch {
                context: "push_pair",
                expected: s.len(),
                actual: y.len(),
            });
        }
        if !vecmath::all_finite(&s) {
            return Err(OptimError::numerical("push_pair: nonfinite s"));
        }
        if !vecmath::all_finite(&y) {
            return Err(OptimError::numerical("push_pair: nonfinite y"));
        }

        let sy = vecmath::dot(&s, &y);
        let ss = vecmath::dot(&s, &s);
        if !(sy > eps_skip * ss) || ss == 0.0 {
            return Ok(PushOutcome::Skipped);
        }
        if self.capacity == 0 {
            // Nothing can ever be stored; treat as a skip.
            return Ok(PushOutcome::Skipped);
        }

        let rho = 1.0 / sy;
        if !rho.is_finite() || rho <= 0.0 {
            return Ok(PushOutcome::Skipped);
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { s, y, rho });
        Ok(PushOutcome::Stored)
    }
}

/// Strictly positive diagonal used to seed the recursion (the H0 matrix).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalScaling {
    diag: Vec<f64>,
}

impl DiagonalScaling {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if !diag.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(OptimError::numerical(
                "diagonal scaling entries must be finite and strictly positive",
            ));
        }
        Ok(DiagonalScaling { diag })
    }

    pub fn identity(n: usize) -> Self {
        DiagonalScaling { diag: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diag
    }
}

/// Two-loop recursion: returns the search direction `p = -H g`, where `H` is
/// the L-BFGS inverse-Hessian approximation built from `mem` over the seed
/// diagonal `h0`.
///
/// The backward loop walks pairs newest to oldest, the forward loop oldest to
/// newest. With an empty memory the result is exactly the diagonal step
/// `-h0 .* g`.
pub fn two_loop_direction(
    g: &GradVector,
    mem: &LbfgsMemory,
    h0: &DiagonalScaling,
) -> Result<ParamVector> {
    let n = g.len();
    if h0.len() != n {
        return Err(OptimError::DimensionMismatch {
            context: "two_loop_direction: h0",
            expected: n,
            actual: h0.len(),
        });
    }
    for pair in mem.pairs() {
        if pair.s.len() != n {
            return Err(OptimError::DimensionMismatch {
                context: "two_loop_direction: stored pair",
                expected: n,
                actual: pair.s.len(),
            });
        }
    }

    let tau = mem.len();
    let mut q = g.clone();
    let mut alphas = vec![0.0; tau];

    // Backward loop, newest pair first.
    for (k, pair) in mem.pairs.iter().enumerate().rev() {
        let alpha = pair.rho * vecmath::dot(&pair.s, &q);
        if !alpha.is_finite() {
            return Err(OptimError::numerical_at("two_loop_direction: backward loop", k));
        }
        vecmath::axpy(&mut q, -alpha, &pair.y);
        alphas[k] = alpha;
    }

    // Seed: r = H0 q, then negate so the returned vector is the direction.
    let mut r = vecmath::neg_mul(h0.as_slice(), &q);

    // Forward loop, oldest pair first. r currently holds -(H0 q) and keeps
    // the flipped sign through the updates, so each correction enters as
    // r -= s * (alpha - beta) with beta computed on -r.
    for (k, pair) in mem.pairs.iter().enumerate() {
        let beta = -pair.rho * vecmath::dot(&pair.y, &r);
        if !beta.is_finite() {
            return Err(OptimError::numerical_at("two_loop_direction: forward loop", k));
        }
        vecmath::axpy(&mut r, -(alphas[k] - beta), &pair.s);
    }

    if !vecmath::all_finite(&r) {
        return Err(OptimError::numerical("two_loop_direction: nonfinite result"));
    }
    Ok(r)
}

/// Dense inverse-BFGS oracle for testing: materializes the n x n matrix `H`
/// implied by the stored pairs via the textbook rank-2 update
/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`, applied oldest first
/// over the seed `diag(h0)`.
///
/// Intended for small test dimensions only; `H g` must match
/// `-two_loop_direction(g, mem, h0)`.
pub fn bfgs_dense_oracle(mem: &LbfgsMemory, h0: &DiagonalScaling) -> Vec<Vec<f64>> {
    let n = h0.len();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        h[i][i] = h0.as_slice()[i];
    }

    for pair in mem.pairs() {
        let rho = pair.rho;
        let s = &pair.s;
        let y = &pair.y;
        // a = (I - rho s y') H
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = h[i][j];
                for k in 0..n {
                    acc -= rho * s[i] * y[k] * h[k][j];
                }
                a[i][j] = acc;
            }
        }
        // h = a (I - rho y s') + rho s s'
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = a[i][j];
                for k in 0..n {
                    acc -= a[i][k] * rho * y[k] * s[j];
                }
                next[i][j] = acc + rho * s[i] * s[j];
            }
        }
        h = next;
    }
    h
}

/// Multiply the dense oracle matrix by a vector.
pub fn dense_matvec(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter()
        .map(|row| row.iter().zip(g).map(|(a, b)| a * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / norm.max(1e-300)
    }

    /// Build a random memory of admissible pairs (y = s plus a contraction
    /// keeps s'y comfortably positive).
    fn random_memory(rng: &mut ChaCha8Rng, n: usize, pairs: usize, cap: usize) -> LbfgsMemory {
        let mut mem = LbfgsMemory::new(cap);
        while mem.len() < pairs {
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y: Vec<f64> = s.clone();
            for v in y.iter_mut() {
                *v *= rng.gen_range(0.2..2.0);
            }
            for v in y.iter_mut() {
                *v += rng.gen_range(-0.05..0.05);
            }
            let _ = mem.push_pair(s, y, 1e-4).unwrap();
        }
        mem
    }

    #[test]
    fn empty_memory_is_diagonal_step() {
        let mem = LbfgsMemory::new(10);
        let h0 = DiagonalScaling::identity(2);
        let p = two_loop_direction(&vec![1.0, 2.0], &mem, &h0).unwrap();
        assert_eq!(p, vec![-1.0, -2.0]);

        let h0 = DiagonalScaling::new(vec![1.0 / 3.0, 1.0 / 4.0]).unwrap();
        let p = two_loop_direction(&vec![3.0, 4.0], &mem, &h0).unwrap();
        assert_eq!(p, vec![-1.0, -1.0]);
    }

    #[test]
    fn single_pair_hand_trace() {
        // s = y = e1, rho = 1: backward gives alpha=1, q=[0,1];
        // r = [0,1]; forward beta=0, r=[1,1]; direction is the negation.
        let mut mem = LbfgsMemory::new(10);
        assert_eq!(
            mem.push_pair(vec![1.0, 0.0], vec![1.0, 0.0], 1e-4).unwrap(),
            PushOutcome::Stored
        );
        let h0 = DiagonalScaling::identity(2);
        let p = two_loop_direction(&vec![1.0, 1.0], &mem, &h0).unwrap();
        assert!(rel_err(&p, &[-1.0, -1.0]) < 1e-15, "p = {p:?}");
    }

    #[test]
    fn oracle_identity_cases() {
        // Empty memory: H = diag(h0).
        let mem = LbfgsMemory::new(5);
        let h0 = DiagonalScaling::new(vec![2.0, 3.0]).unwrap();
        let h = bfgs_dense_oracle(&mem, &h0);
        assert_eq!(h, vec![vec![2.0, 0.0], vec![0.0, 3.0]]);

        // One pair s = y = e1 over identity: the rank-2 update collapses to I.
        let mut mem = LbfgsMemory::new(5);
        mem.push_pair(vec![1.0, 0.0], vec![1.0, 0.0], 1e-4).unwrap();
        let h = bfgs_dense_oracle(&mem, &DiagonalScaling::identity(2));
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h[i][j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn oracle_matches_two_loop_on_random_memories() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..50 {
            let n = rng.gen_range(2..=8);
            let pairs = rng.gen_range(0..=5);
            let mem = random_memory(&mut rng, n, pairs, 5);
            let h0 = DiagonalScaling::new((0..n).map(|_| rng.gen_range(0.1..3.0)).collect()).unwrap();
            let h = bfgs_dense_oracle(&mem, &h0);
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let hg = dense_matvec(&h, &g);
            let p = two_loop_direction(&g, &mem, &h0).unwrap();
            let neg_hg: Vec<f64> = hg.iter().map(|v| -v).collect();
            assert!(
                rel_err(&p, &neg_hg) <= 1e-12,
                "trial {trial}: rel err {} with {} pairs at n={n}",
                rel_err(&p, &neg_hg),
                mem.len()
            );
        }
    }

    #[test]
    fn oracle_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mem = random_memory(&mut rng, 6, 4, 10);
        let h0 = DiagonalScaling::new((0..6).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let h = bfgs_dense_oracle(&mem, &h0);
        for _ in 0..100 {
            let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let hg = dense_matvec(&h, &g);
            let quad: f64 = g.iter().zip(&hg).map(|(a, b)| a * b).sum();
            assert!(quad > 0.0, "g'Hg = {quad}");
        }
    }

    #[test]
    fn push_pair_admission() {
        let mut mem = LbfgsMemory::new(10);
        // Zero curvature: skipped.
        assert_eq!(
            mem.push_pair(vec![1.0, 0.0], vec![0.0, 0.0], 1e-4).unwrap(),
            PushOutcome::Skipped
        );
        assert!(mem.is_empty());
        // s'y = 2.5 > 1e-4 * 2: stored.
        assert_eq!(
            mem.push_pair(vec![1.0, 1.0], vec![0.5, 2.0], 1e-4).unwrap(),
            PushOutcome::Stored
        );
        assert_eq!(mem.len(), 1);
        let pair = mem.pairs().next().unwrap();
        assert!((pair.rho - 1.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn push_pair_rejects_nonfinite() {
        let mut mem = LbfgsMemory::new(4);
        let err = mem.push_pair(vec![f64::NAN, 0.0], vec![1.0, 0.0], 1e-4);
        assert!(err.is_err());
        assert!(mem.is_empty());
    }

    #[test]
    fn fifo_eviction_keeps_capacity() {
        let mut mem = LbfgsMemory::new(3);
        for k in 0..5 {
            let s = vec![1.0 + k as f64, 0.0];
            let y = s.clone();
            assert_eq!(mem.push_pair(s, y, 1e-4).unwrap(), PushOutcome::Stored);
        }
        assert_eq!(mem.len(), 3);
        // Oldest surviving pair is the third one pushed.
        assert_eq!(mem.pairs().next().unwrap().s[0], 3.0);
    }

    #[test]
    fn zero_capacity_never_stores() {
        let mut mem = LbfgsMemory::new(0);
        assert_eq!(
            mem.push_pair(vec![1.0], vec![1.0], 1e-4).unwrap(),
            PushOutcome::Skipped
        );
        assert_eq!(mem.len(), 0);
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let mem = LbfgsMemory::new(2);
        let h0 = DiagonalScaling::identity(3);
        assert!(two_loop_direction(&vec![1.0, 2.0], &mem, &h0).is_err());
    }

    #[test]
    fn direction_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mem = random_memory(&mut rng, 8, 6, 10);
        let h0 = DiagonalScaling::new((0..8).map(|_| rng.gen_range(0.1..2.0)).collect()).unwrap();
        let g: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p1 = two_loop_direction(&g, &mem, &h0).unwrap();
        let p2 = two_loop_direction(&g, &mem, &h0).unwrap();
        assert_eq!(p1, p2);
    }
}
