//! Stochastic objectives exposing value/gradient on index batches, plus a
//! finite-difference gradient oracle used for verification.

mod logistic;
mod quadratic;
mod rnn;
mod sphere;

pub use logistic::LogisticProblem;
pub use quadratic::QuadraticProblem;
pub use rnn::{Activation, PixelSequenceProblem, RnnConfig, RnnLmProblem, WeightLayout};
pub use sphere::SphereProblem;

use crate::error::Result;

/// A finite-sum objective `f(w) = (1/m) sum_i f_i(w)` evaluated on index
/// batches. Implementations are immutable after construction; `value` and
/// `gradient` are pure and deterministic given `(w, batch)`.
pub trait StochasticObjective {
    /// Parameter dimension n.
    fn dim(&self) -> usize;

    /// Number of examples m.
    fn num_examples(&self) -> usize;

    /// Mean loss over the batch.
    fn value(&self, w: &[f64], batch: &[usize]) -> Result<f64>;

    /// Mean loss and mean gradient over the batch in one evaluation.
    fn value_grad(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)>;

    /// Mean gradient over the batch.
    fn gradient(&self, w: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        self.value_grad(w, batch).map(|(_, g)| g)
    }

    /// Gradient of a single example's loss, used for empirical Fisher
    /// products. Must average (over a batch) to `gradient`.
    fn per_example_gradient(&self, w: &[f64], index: usize) -> Result<Vec<f64>>;

    /// Classification accuracy on a batch, when the task defines one.
    fn accuracy(&self, _w: &[f64], _batch: &[usize]) -> Option<f64> {
        None
    }
}

/// Central-difference gradient oracle:
/// `[(f(w + h e_i) - f(w - h e_i)) / 2h]_i`.
///
/// Exists to check analytic gradients; it never feeds an optimizer.
pub fn finite_diff_gradient(
    objective: &dyn StochasticObjective,
    w: &[f64],
    batch: &[usize],
    step: f64,
) -> Result<Vec<f64>> {
    assert!(step > 0.0);
    let mut grad = vec![0.0; w.len()];
    let mut probe = w.to_vec();
    for i in 0..w.len() {
        probe[i] = w[i] + step;
        let f_plus = objective.value(&probe, batch)?;
        probe[i] = w[i] - step;
        let f_minus = objective.value(&probe, batch)?;
        probe[i] = w[i];
        grad[i] = (f_plus - f_minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Relative error between two vectors, measured in the Euclidean norm of the
/// reference. Shared by gradient-check tests.
pub fn rel_err(candidate: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = candidate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}
