//! The adaQN state machine: per-iteration two-loop updates seeded by an
//! accumulated-squared-gradient diagonal, an aggregation cycle that averages
//! iterates, monitored step acceptance/rejection, and curvature pairs built
//! from Fisher-matrix-vector products.
//!
//! One iteration performs, in order:
//! 1. stochastic gradient at `w` on the given batch,
//! 2. `accumulator += g²` and the diagonal seed `h0 = 1/sqrt(sums + eps)`,
//! 3. direction `p = two_loop(g, memory, h0)` and update `w += α p`,
//! 4. `g` enters the gradient FIFO and `w` the running cycle sum,
//! 5. every L-th iteration, a cycle boundary: the averaged iterate `w̄_n` is
//!    compared against the retained `w̄_o` on the monitoring set. A rejected
//!    step flushes the memory and FIFO and rewinds `w` to `w̄_o`; an accepted
//!    one forms `s = w̄_n - w̄_o`, `y = Fisher · s` and attempts to store the
//!    pair, moving `w̄_o` only when the pair is admitted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OptimError, Result};
use crate::fisher::{
    adagrad_scaling, afim_matvec, efim_matvec, GradientFifo, SquaredGradAccumulator,
};
use crate::lbfgs::{two_loop_direction, LbfgsMemory, ParamVector, PushOutcome};
use crate::problems::StochasticObjective;
use crate::vecmath;

/// Step-rejection test applied at cycle boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// Reject when `f_new > gamma * f_old` (default, gamma = 1.01).
    AbsoluteFactor { gamma: f64 },
    /// Reject when `(f_new - f_old) / f_old > gamma_tilde`.
    RelativeImprovement { gamma_tilde: f64 },
}

impl Default for AcceptanceRule {
    fn default() -> Self {
        AcceptanceRule::AbsoluteFactor { gamma: 1.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Apply the rejection test. A nonfinite `f_new` always rejects (the step is
/// treated as catastrophic); `f_old` is finite by construction because it was
/// validated when cached.
pub fn acceptance_check(f_new: f64, f_old: f64, rule: &AcceptanceRule) -> Decision {
    if !f_new.is_finite() {
        return Decision::Reject;
    }
    let reject = match *rule {
        AcceptanceRule::AbsoluteFactor { gamma } => f_new > gamma * f_old,
        AcceptanceRule::RelativeImprovement { gamma_tilde } => {
            (f_new - f_old) / f_old > gamma_tilde
        }
    };
    if reject {
        Decision::Reject
    } else {
        Decision::Accept
    }
}

/// Where the `y` vector of a curvature pair comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSource {
    /// FIFO of recent stochastic gradients (aFIM).
    AccumulatedFisher,
    /// Fresh per-example gradients on the monitoring set (eFIM).
    EmpiricalFisher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaqnConfig {
    /// Step length α, constant for the run.
    pub alpha: f64,
    /// Aggregation cycle length L: iterations between update attempts.
    pub cycle_length: usize,
    /// Maximum stored curvature pairs (m_L).
    pub memory_size: usize,
    /// Gradient FIFO capacity (m_F).
    pub fifo_size: usize,
    /// Curvature admission threshold: store only if s'y > eps_skip * s's.
    /// `f64::INFINITY` disables admission entirely (pure diagonal fallback).
    pub eps_skip: f64,
    /// Shift inside the seed diagonal 1/sqrt(sums + eps_scale).
    pub eps_scale: f64,
    /// Mini-batch size b (also the monitoring-set size).
    pub batch_size: usize,
    pub acceptance: AcceptanceRule,
    pub curvature: CurvatureSource,
    /// Re-draw the monitoring set at every cycle boundary (opt-in; the
    /// reference loss is then recomputed on the current set).
    pub rotate_monitoring: bool,
}

impl Default for AdaqnConfig {
    fn default() -> Self {
        AdaqnConfig {
            alpha: 0.01,
            cycle_length: 10,
            memory_size: 10,
            fifo_size: 100,
            eps_skip: 1e-4,
            eps_scale: 1e-4,
            batch_size: 32,
            acceptance: AcceptanceRule::default(),
            curvature: CurvatureSource::AccumulatedFisher,
            rotate_monitoring: false,
        }
    }
}

impl AdaqnConfig {
    /// Structural checks every state requires. Deliberately does not insist
    /// on gamma > 1: scripted rejection tests run with gamma < 1 on purpose.
    /// Experiment configs go through [`AdaqnConfig::validate`] instead.
    pub fn check_structure(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(OptimError::Config("alpha must be positive finite".into()));
        }
        if self.cycle_length == 0 {
            return Err(OptimError::Config("cycle length L must be >= 1".into()));
        }
        if !(self.eps_skip > 0.0) {
            return Err(OptimError::Config("eps_skip must be > 0".into()));
        }
        if !(self.eps_scale > 0.0 && self.eps_scale.is_finite()) {
            return Err(OptimError::Config("eps_scale must be positive finite".into()));
        }
        if self.batch_size == 0 {
            return Err(OptimError::Config("batch size must be >= 1".into()));
        }
        match self.acceptance {
            AcceptanceRule::AbsoluteFactor { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(OptimError::Config("gamma must be positive finite".into()));
                }
            }
            AcceptanceRule::RelativeImprovement { gamma_tilde } => {
                if !(0.0 < gamma_tilde && gamma_tilde < 1.0) {
                    return Err(OptimError::Config("gamma_tilde must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    /// Full validation for experiment configs: structure plus gamma > 1
    /// (a rejection factor at or below 1 rejects non-worsening steps).
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        if let AcceptanceRule::AbsoluteFactor { gamma } = self.acceptance {
            if gamma <= 1.0 {
                return Err(OptimError::Config(format!(
                    "gamma = {gamma} must exceed 1"
                )));
            }
        }
        Ok(())
    }
}

/// Fixed set of example indices whose loss decides acceptance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringSet {
    pub indices: Vec<usize>,
}

impl MonitoringSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(OptimError::Config("monitoring set must be nonempty".into()));
        }
        Ok(MonitoringSet { indices })
    }

    /// Draw `size` distinct indices from `0..num_examples` (clamped to the
    /// population size).
    pub fn sample(num_examples: usize, size: usize, seed: u64) -> Result<Self> {
        if num_examples == 0 || size == 0 {
            return Err(OptimError::Config("monitoring set must be nonempty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let take = size.min(num_examples);
        let mut indices = rand::seq::index::sample(&mut rng, num_examples, take).into_vec();
        indices.sort_unstable();
        Ok(MonitoringSet { indices })
    }
}

/// Cycle bookkeeping: the running iterate sum, the retained average, and the
/// iteration/cycle counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationState {
    pub w_sum: ParamVector,
    pub w_bar_old: Option<ParamVector>,
    /// Monitoring loss at `w_bar_old`, cached when it was set.
    pub f_bar_old: Option<f64>,
    /// Completed iterations (k).
    pub iter_k: u64,
    /// Completed non-rejected cycles (t).
    pub cycle_t: u64,
}

/// What happened at an iteration: nothing special, or one of the three
/// cycle-boundary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleEvent {
    Plain,
    CycleAccepted,
    CycleSkipped,
    CycleRejected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationReport {
    /// 1-based count of completed iterations.
    pub iteration: u64,
    /// Mini-batch loss at the pre-step iterate.
    pub loss: f64,
    pub grad_norm: f64,
    /// Stored curvature pairs after the iteration.
    pub memory_size: usize,
    pub fifo_size: usize,
    pub event: CycleEvent,
}

/// The full Algorithm state; advanced exclusively through [`AdaqnState::step`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaqnState {
    pub w: ParamVector,
    pub memory: LbfgsMemory,
    pub fifo: GradientFifo,
    pub accumulator: SquaredGradAccumulator,
    pub agg: AggregationState,
    pub config: AdaqnConfig,
    pub monitoring: MonitoringSet,
    /// Seed for monitoring-set rotation; combined with the boundary counter,
    /// so the serialized counters are the complete RNG state.
    pub rng_seed: u64,
}

impl AdaqnState {
    pub fn new(
        w0: ParamVector,
        config: AdaqnConfig,
        monitoring: MonitoringSet,
        rng_seed: u64,
    ) -> Result<Self> {
        config.check_structure()?;
        if w0.is_empty() {
            return Err(OptimError::Config("empty initial iterate".into()));
        }
        if !vecmath::all_finite(&w0) {
            return Err(OptimError::numerical("nonfinite initial iterate"));
        }
        let n = w0.len();
        Ok(AdaqnState {
            w: w0,
            memory: LbfgsMemory::new(config.memory_size),
            fifo: GradientFifo::new(config.fifo_size),
            accumulator: SquaredGradAccumulator::new(n),
            agg: AggregationState {
                w_sum: vec![0.0; n],
                w_bar_old: None,
                f_bar_old: None,
                iter_k: 0,
                cycle_t: 0,
            },
            config,
            monitoring,
            rng_seed,
        })
    }

    /// With both containers sized zero the aggregation machinery can never
    /// produce a pair; skip it entirely so the per-iteration work collapses
    /// to exactly the Adagrad kernel sequence.
    fn aggregation_enabled(&self) -> bool {
        self.config.memory_size > 0 || self.config.fifo_size > 0
    }

    /// Loss on the monitoring set at an arbitrary point.
    pub fn monitoring_loss(
        &self,
        objective: &dyn StochasticObjective,
        at: &[f64],
    ) -> Result<f64> {
        objective.value(at, &self.monitoring.indices)
    }

    /// One Algorithm iteration over `batch`.
    pub fn step(
        &mut self,
        objective: &dyn StochasticObjective,
        batch: &[usize],
    ) -> Result<IterationReport> {
        if batch.is_empty() {
            return Err(OptimError::Config("step: empty batch".into()));
        }
        let k = self.agg.iter_k;
        let n = self.w.len();

        let (loss, g) = objective
            .value_grad(&self.w, batch)
            .map_err(|e| e.in_step("gradient evaluation", k))?;
        if g.len() != n {
            return Err(OptimError::DimensionMismatch {
                context: "step: gradient",
                expected: n,
                actual: g.len(),
            });
        }
        if !loss.is_finite() || !vecmath::all_finite(&g) {
            return Err(
                OptimError::numerical("nonfinite loss or gradient")
                    .in_step("gradient evaluation", k),
            );
        }
        let grad_norm = vecmath::norm(&g);

        self.accumulator
            .accumulate(&g)
            .map_err(|e| e.in_step("squared-gradient accumulation", k))?;
        let h0 = adagrad_scaling(&self.accumulator, self.config.eps_scale)
            .map_err(|e| e.in_step("adagrad scaling", k))?;
        let p = two_loop_direction(&g, &self.memory, &h0)
            .map_err(|e| e.in_step("two-loop recursion", k))?;

        vecmath::axpy(&mut self.w, self.config.alpha, &p);
        if !vecmath::all_finite(&self.w) {
            return Err(
                OptimError::numerical("nonfinite iterate").in_step("iterate update", k)
            );
        }

        if self.aggregation_enabled() {
            self.fifo.push(g, batch.len())?;
            vecmath::add_assign(&mut self.agg.w_sum, &self.w);
        }

        self.agg.iter_k += 1;

        let event = if self.aggregation_enabled()
            && self.agg.iter_k % self.config.cycle_length as u64 == 0
        {
            self.cycle_boundary(objective)
                .map_err(|e| e.in_step("cycle boundary", k))?
        } else {
            CycleEvent::Plain
        };

        Ok(IterationReport {
            iteration: self.agg.iter_k,
            loss,
            grad_norm,
            memory_size: self.memory.len(),
            fifo_size: self.fifo.len(),
            event,
        })
    }

    /// Process a cycle boundary: average the iterates, run the acceptance
    /// test, and attempt a curvature-pair update.
    fn cycle_boundary(&mut self, objective: &dyn StochasticObjective) -> Result<CycleEvent> {
        let n = self.w.len();
        let mut w_bar_new = std::mem::replace(&mut self.agg.w_sum, vec![0.0; n]);
        vecmath::scale(&mut w_bar_new, 1.0 / self.config.cycle_length as f64);

        // First boundary: establish the reference average and its loss.
        if self.agg.cycle_t == 0 {
            let f = self.monitoring_loss(objective, &w_bar_new)?;
            if !f.is_finite() {
                return Err(OptimError::numerical(
                    "monitoring loss nonfinite at first boundary",
                ));
            }
            self.agg.w_bar_old = Some(w_bar_new);
            self.agg.f_bar_old = Some(f);
            self.agg.cycle_t += 1;
            return Ok(CycleEvent::CycleAccepted);
        }

        if self.config.rotate_monitoring {
            self.rotate_monitoring_set(objective);
            let w_old = self
                .agg
                .w_bar_old
                .clone()
                .expect("w_bar_old set once cycle_t > 0");
            let f_old = self.monitoring_loss(objective, &w_old)?;
            if !f_old.is_finite() {
                return Err(OptimError::numerical(
                    "monitoring loss nonfinite after rotation",
                ));
            }
            self.agg.f_bar_old = Some(f_old);
        }

        let f_old = self.agg.f_bar_old.expect("cached with w_bar_old");
        let f_new = self.monitoring_loss(objective, &w_bar_new)?;

        match acceptance_check(f_new, f_old, &self.config.acceptance) {
            Decision::Reject => {
                self.memory.clear();
                self.fifo.clear();
                self.w
                    .copy_from_slice(self.agg.w_bar_old.as_ref().expect("set above"));
                // cycle_t, w_bar_old, and the cached loss stay as they were.
                Ok(CycleEvent::CycleRejected)
            }
            Decision::Accept => {
                if self.fifo.is_empty()
                    && self.config.curvature == CurvatureSource::AccumulatedFisher
                {
                    // Possible only when a rejection flushed the FIFO and the
                    // next boundary arrived before any gradient was stored
                    // (fifo_size = 0 configurations included).
                    self.agg.cycle_t += 1;
                    return Ok(CycleEvent::CycleSkipped);
                }
                let s = vecmath::sub(&w_bar_new, self.agg.w_bar_old.as_ref().expect("set above"));
                let y = match self.config.curvature {
                    CurvatureSource::AccumulatedFisher => afim_matvec(&self.fifo, &s)?,
                    CurvatureSource::EmpiricalFisher => {
                        efim_matvec(objective, &self.monitoring.indices, &w_bar_new, &s)?
                    }
                };
                let outcome = self.memory.push_pair(s, y, self.config.eps_skip)?;
                self.agg.cycle_t += 1;
                match outcome {
                    PushOutcome::Stored => {
                        self.agg.w_bar_old = Some(w_bar_new);
                        self.agg.f_bar_old = Some(f_new);
                        Ok(CycleEvent::CycleAccepted)
                    }
                    // Leaving w_bar_old in place lets a later cycle measure
                    // curvature over a longer displacement.
                    PushOutcome::Skipped => Ok(CycleEvent::CycleSkipped),
                }
            }
        }
    }

    /// Re-draw the monitoring set; the stream index is the boundary counter,
    /// so rotation is reproducible from (rng_seed, iter_k) alone.
    fn rotate_monitoring_set(&mut self, objective: &dyn StochasticObjective) {
        let m = objective.num_examples();
        if m == 0 {
            return;
        }
        let take = self.monitoring.indices.len().min(m);
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.agg.iter_k / self.config.cycle_length as u64);
        let mut indices = rand::seq::index::sample(&mut rng, m, take).into_vec();
        indices.sort_unstable();
        self.monitoring.indices = indices;
    }
}

/// Mean post-iteration memory size per epoch; the running sum restarts at
/// zero at each epoch boundary. The final partial epoch averages over its
/// own length.
pub fn average_memory_per_epoch(
    reports: &[IterationReport],
    iterations_per_epoch: usize,
) -> Vec<f64> {
    if iterations_per_epoch == 0 {
        return Vec::new();
    }
    reports
        .chunks(iterations_per_epoch)
        .map(|chunk| {
            chunk.iter().map(|r| r.memory_size as f64).sum::<f64>() / chunk.len() as f64
        })
        .collect()
}
