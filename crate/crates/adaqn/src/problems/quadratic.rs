//! Ill-conditioned quadratic with a rotated, prescribed spectrum and an
//! optional per-example gradient-noise term.
//!
//! `f_i(w) = 1/2 w'Aw - b'w + sigma * xi_i'w` with `A = Q diag(spectrum) Q'`
//! for a seeded random orthogonal `Q`. The noise directions `xi_i` are fixed
//! per example, so runs are reproducible and the full-batch noise averages
//! toward zero. With `sigma = 0` the minimizer `w* = A^{-1} b` and the value
//! at the minimum are known in closed form.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{OptimError, Result};
use crate::problems::StochasticObjective;

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    n: usize,
    m: usize,
    /// Dense symmetric PD matrix, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: f64,
    /// Per-example noise directions, length m * n.
    noise: Vec<f64>,
    w_star: Vec<f64>,
    f_star: f64,
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple and seeded.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian matrix.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| sample_standard_normal(rng)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let proj: f64 = (0..n).map(|k| q[i][k] * q[j][k]).sum();
            for k in 0..n {
                q[i][k] -= proj * q[j][k];
            }
        }
        let norm: f64 = q[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in q[i].iter_mut() {
            *v /= norm;
        }
    }
    q
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
fn spd_solve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward solve L z = b.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * z[k];
        }
        z[i] = sum / l[i * n + i];
    }
    // Backward solve L' x = z.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

impl QuadraticProblem {
    /// Build from a prescribed spectrum. `m` examples share the quadratic
    /// part and differ only in the linear noise term scaled by `sigma`.
    pub fn new(spectrum: &[f64], m: usize, sigma: f64, seed: u64) -> Result<Self> {
        let n = spectrum.len();
        if n == 0 || m == 0 {
            return Err(OptimError::Config("quadratic: empty spectrum or zero examples".into()));
        }
        if spectrum.iter().any(|v| *v <= 0.0) {
            return Err(OptimError::Config("quadratic: spectrum must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_orthogonal(n, &mut rng);
        // A = sum_k lambda_k q_k q_k'
        let mut a = vec![0.0; n * n];
        for (k, lambda) in spectrum.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] += lambda * q[k][i] * q[k][j];
                }
            }
        }
        // Exact symmetry despite round-off.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (a[i * n + j] + a[j * n + i]);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| sample_standard_normal(&mut rng)).collect();
        let noise: Vec<f64> = (0..m * n).map(|_| sample_standard_normal(&mut rng)).collect();

        let w_star = spd_solve(&a, &b, n);
        let f_star = -0.5 * b.iter().zip(&w_star).map(|(x, y)| x * y).sum::<f64>();

        Ok(QuadraticProblem {
            n,
            m,
            a,
            b,
            sigma,
            noise,
            w_star,
            f_star,
        })
    }

    /// Geometric spectrum from 1 to `cond`.
    pub fn with_condition(n: usize, cond: f64, m: usize, sigma: f64, seed: u64) -> Result<Self> {
        let spectrum: Vec<f64> = (0..n)
            .map(|i| cond.powf(i as f64 / (n - 1).max(1) as f64))
            .collect();
        Self::new(&spectrum, m, sigma, seed)
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.w_star
    }

    pub fn minimum_value(&self) -> f64 {
        self.f_star
    }

    fn a_mul(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            out[i] = row.iter().zip(w).map(|(a, b)| a * b).sum();
        }
        out
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n {
            return Err(OptimError::DimensionMismatch {
                context: "quadratic",
                expected: self.n,
                actual: w.len(),
            });
        }
        Ok(())
    }
}

impl StochasticObjective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_examples(&self) -> usize {
        self.m
    }

    fn value(&self, w: &[f64], batch: &[usize]) -> Result<f64> {
        self.check_dim(w)?;
        let aw = self.a_mul(w);
        let quad: f64 = 0.5 * w.iter().zip(&aw).map(|(a, b)| a * b).sum::<f64>()
            - self.b.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        if self.sigma == 0.0 {
            return Ok(quad);
        }
        let mut noise_term = 0.0;
        for &i in batch {
            let xi = &self.noise[i * self.n..(i + 1) * self.n];
            noise_term += xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(quad + self.sigma * noise_term / batch.len() as f64)
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(w)?;
        let aw = self.a_mul(w);
        let quad: f64 = 0.5 * w.iter().zip(&aw).map(|(a, b)| a * b).sum::<f64>()
            - self.b.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let mut grad: Vec<f64> = aw.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        let mut value = quad;
        if self.sigma != 0.0 {
            let inv = 1.0 / batch.len() as f64;
            let mut noise_term = 0.0;
            for &i in batch {
                let xi = &self.noise[i * self.n..(i + 1) * self.n];
                noise_term += xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                for k in 0..self.n {
                    grad[k] += self.sigma * inv * xi[k];
                }
            }
            value += self.sigma * noise_term * inv;
        }
        Ok((value, grad))
    }

    fn per_example_gradient(&self, w: &[f64], index: usize) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        let aw = self.a_mul(w);
        let mut grad: Vec<f64> = aw.iter().zip(&self.b).map(|(a, b)| a - b).collect();
        if self.sigma != 0.0 {
            let xi = &self.noise[index * self.n..(index + 1) * self.n];
            for k in 0..self.n {
                grad[k] += self.sigma * xi[k];
            }
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{finite_diff_gradient, rel_err};

    #[test]
    fn gradient_vanishes_at_minimizer() {
        let p = QuadraticProblem::with_condition(10, 100.0, 4, 0.0, 3).unwrap();
        let w = p.minimizer().to_vec();
        let g = p.gradient(&w, &[0, 1, 2, 3]).unwrap();
        let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(gnorm < 1e-10, "grad norm at w* = {gnorm}");
    }

    #[test]
    fn identity_quadratic_hand_values() {
        // Spectrum all ones makes A the identity regardless of rotation.
        let p = QuadraticProblem::new(&[1.0, 1.0], 1, 0.0, 5).unwrap();
        let w = vec![1.0, 1.0];
        let (value, grad) = p.value_grad(&w, &[0]).unwrap();
        let b = &p.b;
        let expect = 0.5 * 2.0 - (b[0] + b[1]);
        assert!((value - expect).abs() < 1e-12);
        assert!((grad[0] - (1.0 - b[0])).abs() < 1e-12);
        assert!((grad[1] - (1.0 - b[1])).abs() < 1e-12);
    }

    #[test]
    fn matches_finite_differences() {
        let p = QuadraticProblem::with_condition(10, 1e4, 6, 0.3, 9).unwrap();
        let w: Vec<f64> = (0..10).map(|i| 0.1 * i as f64 - 0.4).collect();
        let batch = [1, 3, 5];
        let g = p.gradient(&w, &batch).unwrap();
        let fd = finite_diff_gradient(&p, &w, &batch, 1e-5).unwrap();
        assert!(rel_err(&g, &fd) < 1e-8, "rel err {}", rel_err(&g, &fd));
    }

    #[test]
    fn batch_gradient_is_mean_of_per_example() {
        let p = QuadraticProblem::with_condition(8, 50.0, 5, 0.7, 21).unwrap();
        let w: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let batch = [0, 2, 4];
        let g = p.gradient(&w, &batch).unwrap();
        let mut mean = vec![0.0; 8];
        for &i in &batch {
            let gi = p.per_example_gradient(&w, i).unwrap();
            for k in 0..8 {
                mean[k] += gi[k] / batch.len() as f64;
            }
        }
        assert!(rel_err(&g, &mean) < 1e-12);
    }

    #[test]
    fn spectrum_controls_directional_scale() {
        // At equal displacement along the top and bottom eigenvectors the
        // gradient norm ratio equals the condition number.
        let p = QuadraticProblem::new(&[1.0, 1e4], 1, 0.0, 13).unwrap();
        let w_star = p.minimizer().to_vec();
        // Recover eigenvectors by probing A through the gradient.
        let probe = |d: &[f64]| -> Vec<f64> {
            let w: Vec<f64> = w_star.iter().zip(d).map(|(a, b)| a + b).collect();
            p.gradient(&w, &[0]).unwrap()
        };
        // Power iteration for the top eigenvector.
        let mut v = vec![1.0, 0.3];
        for _ in 0..200 {
            let av = probe(&v);
            let norm: f64 = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = av.iter().map(|x| x / norm).collect();
        }
        let top_norm: f64 = probe(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
        // Bottom eigenvector is orthogonal in 2-D.
        let u = vec![-v[1], v[0]];
        let bot_norm: f64 = probe(&u).iter().map(|x| x * x).sum::<f64>().sqrt();
        let ratio = top_norm / bot_norm;
        assert!((ratio - 1e4).abs() / 1e4 < 1e-6, "ratio {ratio}");
    }
}
