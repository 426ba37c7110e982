//! Binary logistic regression on seeded synthetic data.
//!
//! `f_i(w) = -[y_i ln s(x_i'w) + (1 - y_i) ln(1 - s(x_i'w))]` with labels in
//! {0, 1}, so the per-example gradient is `x_i (s(x_i'w) - y_i)`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{OptimError, Result};
use crate::problems::StochasticObjective;

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    n: usize,
    m: usize,
    /// Row-major m x n feature matrix.
    features: Vec<f64>,
    labels: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable -[y ln s(z) + (1-y) ln(1-s(z))].
fn logistic_loss(z: f64, y: f64) -> f64 {
    // ln(1 + e^z) - y z, computed without overflow.
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

impl LogisticProblem {
    /// Synthetic data: Gaussian features, labels sampled from a planted
    /// logistic model. Everything is derived from the seed.
    pub fn synthetic(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(OptimError::Config("logistic: n and m must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planted: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let mut features = vec![0.0; m * n];
        let mut labels = vec![0.0; m];
        for i in 0..m {
            let row = &mut features[i * n..(i + 1) * n];
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let z: f64 = row.iter().zip(&planted).map(|(a, b)| a * b).sum();
            labels[i] = if rng.gen_range(0.0..1.0) < sigmoid(z) { 1.0 } else { 0.0 };
        }
        Ok(LogisticProblem { n, m, features, labels })
    }

    /// Build from explicit data; used by tests with hand-chosen rows.
    pub fn from_data(features: Vec<f64>, labels: Vec<f64>, n: usize) -> Result<Self> {
        if labels.is_empty() || features.len() != labels.len() * n {
            return Err(OptimError::Config("logistic: inconsistent data shape".into()));
        }
        Ok(LogisticProblem {
            n,
            m: labels.len(),
            features,
            labels,
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n..(i + 1) * self.n]
    }
}

impl StochasticObjective for LogisticProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_examples(&self) -> usize {
        self.m
    }

    fn value(&self, w: &[f64], batch: &[usize]) -> Result<f64> {
        if batch.is_empty() {
            return Err(OptimError::Config("logistic: empty batch".into()));
        }
        let mut total = 0.0;
        for &i in batch {
            let z: f64 = self.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
            total += logistic_loss(z, self.labels[i]);
        }
        Ok(total / batch.len() as f64)
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(OptimError::Config("logistic: empty batch".into()));
        }
        let inv = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; self.n];
        for &i in batch {
            let x = self.row(i);
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            total += logistic_loss(z, self.labels[i]);
            let coeff = (sigmoid(z) - self.labels[i]) * inv;
            for k in 0..self.n {
                grad[k] += coeff * x[k];
            }
        }
        Ok((total * inv, grad))
    }

    fn per_example_gradient(&self, w: &[f64], index: usize) -> Result<Vec<f64>> {
        let x = self.row(index);
        let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let coeff = sigmoid(z) - self.labels[index];
        Ok(x.iter().map(|v| coeff * v).collect())
    }
}
