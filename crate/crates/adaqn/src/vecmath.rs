//! Counted vector kernels used by the optimizer state machines.
//!
//! All loops run in fixed index order so results are bitwise reproducible.
//! The operation counter uses a multiply-accumulate convention: every kernel
//! reports one operation per output element per pass (a fused multiply-add,
//! a square root, or a division each count once). Under this convention the
//! two-loop recursion costs exactly 4·m·n — two dot products and two axpys
//! per stored pair — which is the form complexity claims about the optimizer
//! are stated in.

use crate::flops;

/// Dot product a·b.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    flops::add(a.len() as u64);
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// y += c * x.
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    flops::add(y.len() as u64);
    for i in 0..y.len() {
        y[i] += c * x[i];
    }
}

/// x *= c.
pub fn scale(x: &mut [f64], c: f64) {
    flops::add(x.len() as u64);
    for v in x.iter_mut() {
        *v *= c;
    }
}

/// out = a - b.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    flops::add(a.len() as u64);
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// y += x.
pub fn add_assign(y: &mut [f64], x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    flops::add(y.len() as u64);
    for i in 0..y.len() {
        y[i] += x[i];
    }
}

/// acc += x^2 elementwise.
pub fn accumulate_squares(acc: &mut [f64], x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    flops::add(acc.len() as u64);
    for i in 0..acc.len() {
        acc[i] += x[i] * x[i];
    }
}

/// y += c * x^2 elementwise (exponentially weighted squared-gradient sums).
pub fn axpy_squared(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    flops::add(y.len() as u64);
    for i in 0..y.len() {
        y[i] += c * x[i] * x[i];
    }
}

/// out_i = -(d_i * g_i). The negated elementwise product is the diagonal
/// descent direction; Adagrad and the empty-memory two-loop path share it.
pub fn neg_mul(d: &[f64], g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(d.len(), g.len());
    flops::add(d.len() as u64);
    d.iter().zip(g).map(|(a, b)| -(a * b)).collect()
}

/// out_i = 1 / sqrt(x_i + eps).
pub fn rsqrt_shifted(x: &[f64], eps: f64) -> Vec<f64> {
    flops::add(x.len() as u64);
    x.iter().map(|v| 1.0 / (v + eps).sqrt()).collect()
}

/// Euclidean norm. Not used inside update rules, only for reporting.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flops;

    #[test]
    fn dot_and_axpy() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
        let mut y = vec![1.0, 1.0];
        axpy(&mut y, 2.0, &[3.0, 4.0]);
        assert_eq!(y, vec![7.0, 9.0]);
    }

    #[test]
    fn kernels_count_one_op_per_element() {
        flops::reset();
        let _ = dot(&[1.0; 10], &[2.0; 10]);
        assert_eq!(flops::take(), 10);
        let mut y = vec![0.0; 5];
        axpy(&mut y, 1.0, &[1.0; 5]);
        assert_eq!(flops::take(), 5);
        let _ = rsqrt_shifted(&[1.0; 7], 0.0);
        assert_eq!(flops::take(), 7);
    }

    #[test]
    fn rsqrt_guards_zero() {
        let d = rsqrt_shifted(&[0.0, 0.0], 1e-4);
        assert_eq!(d, vec![100.0, 100.0]);
    }
}
