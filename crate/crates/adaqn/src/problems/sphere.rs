//! A separable probe objective for instrumentation runs: every example is
//! the same sphere `f_i(w) = 0.5 * ||w||^2`, so the gradient is `w` itself
//! and each coordinate evolves independently of the problem size. The flop
//! audit uses it to compare counted optimizer work across widely different
//! `n` under identical per-coordinate trajectories.

use crate::error::Result;
use crate::problems::StochasticObjective;

#[derive(Debug, Clone)]
pub struct SphereProblem {
    n: usize,
    m: usize,
}

impl SphereProblem {
    pub fn new(n: usize, m: usize) -> Self {
        SphereProblem { n, m }
    }
}

impl StochasticObjective for SphereProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_examples(&self) -> usize {
        self.m
    }

    fn value(&self, w: &[f64], _batch: &[usize]) -> Result<f64> {
        Ok(0.5 * w.iter().map(|v| v * v).sum::<f64>())
    }

    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(w, batch)?, w.to_vec()))
    }

    fn per_example_gradient(&self, w: &[f64], _index: usize) -> Result<Vec<f64>> {
        Ok(w.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_is_the_iterate() {
        let p = SphereProblem::new(3, 10);
        let w = vec![1.0, -2.0, 0.5];
        let (f, g) = p.value_grad(&w, &[0]).unwrap();
        assert_eq!(f, 0.5 * (1.0 + 4.0 + 0.25));
        assert_eq!(g, w);
    }
}
