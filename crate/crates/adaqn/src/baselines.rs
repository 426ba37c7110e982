//! Reference first-order optimizers: SGD (with optional heavy-ball
//! momentum), Adagrad, and Adam in its uncorrected exponentially-weighted
//! form — no bias correction anywhere, matching the update family
//! `w' = w - α H (∇f + v·p)` with diagonal H.
//!
//! Adagrad deliberately routes through the same `rsqrt_shifted` / `neg_mul`
//! kernels as the optimizer's empty-memory fallback, so the two produce
//! bitwise-identical trajectories when curvature admission is disabled.

use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};
use crate::fisher::SquaredGradAccumulator;
use crate::vecmath;

/// Heavy-ball state: the previous iterate and the momentum coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumState {
    pub previous_iterate: Vec<f64>,
    pub v: f64,
}

impl MomentumState {
    pub fn new(w0: &[f64], v: f64) -> Result<Self> {
        if v < 0.0 {
            return Err(OptimError::Config("momentum coefficient < 0".into()));
        }
        Ok(MomentumState {
            previous_iterate: w0.to_vec(),
            v,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdagradState {
    pub sums: SquaredGradAccumulator,
    pub eps: f64,
}

impl AdagradState {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if eps < 0.0 {
            return Err(OptimError::Config("adagrad eps < 0".into()));
        }
        Ok(AdagradState {
            sums: SquaredGradAccumulator::new(n),
            eps,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(OptimError::Config(format!("adam {name} outside [0, 1)")));
            }
        }
        if eps < 0.0 {
            return Err(OptimError::Config("adam eps < 0".into()));
        }
        Ok(AdamState {
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            beta1,
            beta2,
            eps,
            step: 0,
        })
    }
}

fn check_result(w: &[f64], op: &'static str) -> Result<()> {
    if vecmath::all_finite(w) {
        Ok(())
    } else {
        Err(OptimError::numerical(op))
    }
}

/// Plain or heavy-ball SGD: `w' = w - α (g + v (w - w_prev))`; the momentum
/// state keeps the pre-step iterate.
pub fn sgd_step(
    w: &mut [f64],
    g: &[f64],
    alpha: f64,
    momentum: Option<&mut MomentumState>,
) -> Result<()> {
    if g.len() != w.len() {
        return Err(OptimError::DimensionMismatch {
            context: "sgd step",
            expected: w.len(),
            actual: g.len(),
        });
    }
    if alpha <= 0.0 {
        return Err(OptimError::Config("sgd: step length must be > 0".into()));
    }
    match momentum {
        None => vecmath::axpy(w, -alpha, g),
        Some(m) => {
            if m.previous_iterate.len() != w.len() {
                return Err(OptimError::DimensionMismatch {
                    context: "sgd momentum state",
                    expected: w.len(),
                    actual: m.previous_iterate.len(),
                });
            }
            let mut dir = g.to_vec();
            let delta = vecmath::sub(w, &m.previous_iterate);
            vecmath::axpy(&mut dir, m.v, &delta);
            m.previous_iterate.copy_from_slice(w);
            vecmath::axpy(w, -alpha, &dir);
        }
    }
    check_result(w, "sgd step: nonfinite iterate")
}

/// Adagrad: `sums += g²; w'_i = w_i - α g_i / sqrt(sums_i + eps)`.
pub fn adagrad_step(state: &mut AdagradState, w: &mut [f64], g: &[f64], alpha: f64) -> Result<()> {
    if alpha <= 0.0 {
        return Err(OptimError::Config("adagrad: step length must be > 0".into()));
    }
    state.sums.accumulate(g)?;
    let d = vecmath::rsqrt_shifted(&state.sums.sums, state.eps);
    let p = vecmath::neg_mul(&d, g);
    vecmath::axpy(w, alpha, &p);
    check_result(w, "adagrad step: nonfinite iterate")
}

/// Adam, uncorrected form: `m ← β₁m + (1-β₁)g; r ← β₂r + (1-β₂)g²;
/// w'_i = w_i - α m_i / sqrt(r_i + eps)`.
pub fn adam_step(state: &mut AdamState, w: &mut [f64], g: &[f64], alpha: f64) -> Result<()> {
    if g.len() != w.len() || state.first_moment.len() != w.len() {
        return Err(OptimError::DimensionMismatch {
            context: "adam step",
            expected: w.len(),
            actual: g.len(),
        });
    }
    if alpha <= 0.0 {
        return Err(OptimError::Config("adam: step length must be > 0".into()));
    }
    if !vecmath::all_finite(g) {
        return Err(OptimError::numerical("adam step: nonfinite gradient"));
    }
    vecmath::scale(&mut state.first_moment, state.beta1);
    vecmath::axpy(&mut state.first_moment, 1.0 - state.beta1, g);
    vecmath::scale(&mut state.second_moment, state.beta2);
    vecmath::axpy_squared(&mut state.second_moment, 1.0 - state.beta2, g);
    let d = vecmath::rsqrt_shifted(&state.second_moment, state.eps);
    let p = vecmath::neg_mul(&d, &state.first_moment);
    vecmath::axpy(w, alpha, &p);
    state.step += 1;
    check_result(w, "adam step: nonfinite iterate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flops;

    #[test]
    fn sgd_plain_formula() {
        let mut w = vec![0.0, 0.0];
        sgd_step(&mut w, &[1.0, 2.0], 0.5, None).unwrap();
        assert_eq!(w, vec![-0.5, -1.0]);
    }

    #[test]
    fn momentum_v0_equals_plain() {
        let mut w1 = vec![0.3, -0.2];
        let mut w2 = w1.clone();
        let mut m = MomentumState::new(&w2, 0.0).unwrap();
        for g in [[1.0, -0.5], [0.2, 0.9]] {
            sgd_step(&mut w1, &g, 0.1, None).unwrap();
            sgd_step(&mut w2, &g, 0.1, Some(&mut m)).unwrap();
        }
        assert_eq!(w1, w2);
    }

    #[test]
    fn momentum_two_step_hand_trace() {
        let mut w = vec![0.0];
        let mut m = MomentumState::new(&w, 0.9).unwrap();
        sgd_step(&mut w, &[1.0], 1.0, Some(&mut m)).unwrap();
        assert_eq!(w, vec![-1.0]);
        sgd_step(&mut w, &[1.0], 1.0, Some(&mut m)).unwrap();
        // w2 = -1 - (1 + 0.9 * (-1 - 0)) = -1.1
        assert!((w[0] + 1.1).abs() < 1e-15, "{}", w[0]);
    }

    #[test]
    fn adagrad_first_step_is_sign() {
        let mut st = AdagradState::new(2, 0.0).unwrap();
        let mut w = vec![0.0, 0.0];
        adagrad_step(&mut st, &mut w, &[3.0, 4.0], 1.0).unwrap();
        assert_eq!(w, vec![-1.0, -1.0]);
    }

    #[test]
    fn adagrad_zero_gradient_is_identity() {
        let mut st = AdagradState::new(2, 1e-8).unwrap();
        let mut w = vec![0.5, -0.5];
        adagrad_step(&mut st, &mut w, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(w, vec![0.5, -0.5]);
        assert_eq!(st.sums.sums, vec![0.0, 0.0]);
    }

    #[test]
    fn adagrad_two_step_accumulation() {
        let mut st = AdagradState::new(1, 0.0).unwrap();
        let mut w = vec![0.0];
        adagrad_step(&mut st, &mut w, &[3.0], 1.0).unwrap();
        let before = w[0];
        adagrad_step(&mut st, &mut w, &[4.0], 1.0).unwrap();
        // second update = -4 / sqrt(9 + 16) = -0.8
        assert!((w[0] - before + 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_value() {
        let mut st = AdamState::new(1, 0.9, 0.999, 0.0).unwrap();
        let mut w = vec![0.0];
        adam_step(&mut st, &mut w, &[1.0], 1.0).unwrap();
        let expect = -0.1 / 0.001f64.sqrt(); // ≈ -3.1623
        assert!((w[0] - expect).abs() < 1e-12, "{} vs {}", w[0], expect);
    }

    #[test]
    fn adam_zero_gradients_never_move() {
        let mut st = AdamState::new(3, 0.9, 0.999, 1e-8).unwrap();
        let mut w = vec![1.0, -2.0, 0.5];
        for _ in 0..5 {
            adam_step(&mut st, &mut w, &[0.0; 3], 0.1).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_degenerate_betas_is_sign_sgd() {
        let mut st = AdamState::new(2, 0.0, 0.0, 0.0).unwrap();
        let mut w = vec![0.0, 0.0];
        adam_step(&mut st, &mut w, &[3.0, -0.25], 0.5).unwrap();
        assert_eq!(w, vec![-0.5, 0.5]);
    }

    /// Diagonal rescaling invariance: scaling every gradient by c > 0 leaves
    /// the update sequence unchanged when eps = 0.
    #[test]
    fn adagrad_and_adam_scale_invariance() {
        let stream: Vec<Vec<f64>> = vec![
            vec![1.0, -2.0, 0.5],
            vec![0.3, 0.3, -0.1],
            vec![-1.5, 0.2, 0.9],
            vec![0.05, -0.6, 2.0],
        ];
        // c = 4 is a power of two, so the invariance is exact in binary
        // floating point; a non-dyadic c is checked with a tolerance.
        for (c, tol) in [(4.0, 0.0), (3.7, 1e-12)] {
            let mut ada_a = AdagradState::new(3, 0.0).unwrap();
            let mut ada_b = AdagradState::new(3, 0.0).unwrap();
            let mut wa = vec![0.1, 0.2, 0.3];
            let mut wb = wa.clone();
            for g in &stream {
                let gc: Vec<f64> = g.iter().map(|v| c * v).collect();
                adagrad_step(&mut ada_a, &mut wa, g, 0.05).unwrap();
                adagrad_step(&mut ada_b, &mut wb, &gc, 0.05).unwrap();
            }
            for i in 0..3 {
                assert!((wa[i] - wb[i]).abs() <= tol, "adagrad c={c}: {wa:?} {wb:?}");
            }

            let mut adam_a = AdamState::new(3, 0.9, 0.99, 0.0).unwrap();
            let mut adam_b = AdamState::new(3, 0.9, 0.99, 0.0).unwrap();
            let mut wa = vec![0.1, 0.2, 0.3];
            let mut wb = wa.clone();
            for g in &stream {
                let gc: Vec<f64> = g.iter().map(|v| c * v).collect();
                adam_step(&mut adam_a, &mut wa, g, 0.05).unwrap();
                adam_step(&mut adam_b, &mut wb, &gc, 0.05).unwrap();
            }
            for i in 0..3 {
                assert!((wa[i] - wb[i]).abs() <= tol, "adam c={c}: {wa:?} {wb:?}");
            }
        }
    }

    /// Counted work per step is exactly linear in n for every baseline.
    #[test]
    fn counted_ops_scale_linearly() {
        fn count_adagrad(n: usize) -> u64 {
            let mut st = AdagradState::new(n, 1e-8).unwrap();
            let mut w = vec![0.1; n];
            let g = vec![0.2; n];
            flops::reset();
            adagrad_step(&mut st, &mut w, &g, 0.1).unwrap();
            flops::take()
        }
        fn count_adam(n: usize) -> u64 {
            let mut st = AdamState::new(n, 0.9, 0.999, 1e-8).unwrap();
            let mut w = vec![0.1; n];
            let g = vec![0.2; n];
            flops::reset();
            adam_step(&mut st, &mut w, &g, 0.1).unwrap();
            flops::take()
        }
        assert_eq!(2 * count_adagrad(100), count_adagrad(200));
        assert_eq!(2 * count_adam(100), count_adam(200));
    }

    #[test]
    fn nonfinite_gradient_is_rejected() {
        let mut st = AdagradState::new(1, 0.0).unwrap();
        let mut w = vec![0.0];
        assert!(adagrad_step(&mut st, &mut w, &[f64::INFINITY], 1.0).is_err());
        let mut st = AdamState::new(1, 0.5, 0.5, 0.0).unwrap();
        assert!(adam_step(&mut st, &mut w, &[f64::NAN], 1.0).is_err());
    }
}
