//! Problem construction from the config and a single driver abstraction over
//! all four optimizers, so the run loop, checkpointing, and the flop audit
//! treat adaQN and the baselines identically. Every driver step reports the
//! same [`IterationReport`] shape; the baselines count the same
//! gradient-norm kernel adaQN counts, keeping per-iteration operation counts
//! directly comparable.

use serde::{Deserialize, Serialize};

use crate::adaqn::{AdaqnState, CycleEvent, IterationReport, MonitoringSet};
use crate::baselines::{
    adagrad_step, adam_step, sgd_step, AdagradState, AdamState, MomentumState,
};
use crate::data::{
    ingest_text, load_cached_corpus, synth_digits, windows_from_corpus,
};
use crate::error::{OptimError, Result};
use crate::harness::config::{derive_seed, ExperimentConfig, ProblemSection};
use crate::problems::{
    LogisticProblem, PixelSequenceProblem, QuadraticProblem, RnnConfig, RnnLmProblem,
    SphereProblem, StochasticObjective,
};
use crate::vecmath;

/// Seed-derivation salts; one purpose per salt so trajectories never share
/// generator streams.
pub const SALT_INIT: u64 = 1;
pub const SALT_MONITOR: u64 = 2;
pub const SALT_SCHEDULE: u64 = 3;
pub const SALT_TEST_DATA: u64 = 9;

pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Logistic(LogisticProblem),
    Sphere(SphereProblem),
    Lm(RnnLmProblem),
    Digits(PixelSequenceProblem),
}

impl BuiltProblem {
    pub fn objective(&self) -> &dyn StochasticObjective {
        match self {
            BuiltProblem::Quadratic(p) => p,
            BuiltProblem::Logistic(p) => p,
            BuiltProblem::Sphere(p) => p,
            BuiltProblem::Lm(p) => p,
            BuiltProblem::Digits(p) => p,
        }
    }
}

/// The training objective, an optional held-out evaluation objective over
/// the same parameter vector, and the initial iterate.
pub struct ProblemSet {
    pub train: BuiltProblem,
    pub test: Option<BuiltProblem>,
    pub w0: Vec<f64>,
}

impl ProblemSet {
    /// Loss (and accuracy, when defined) on the full test split, falling
    /// back to the full training objective when there is no split.
    pub fn test_eval(&self, w: &[f64]) -> Result<(f64, Option<f64>)> {
        let objective = match &self.test {
            Some(t) => t.objective(),
            None => self.train.objective(),
        };
        let all: Vec<usize> = (0..objective.num_examples()).collect();
        let loss = objective.value(w, &all)?;
        let accuracy = objective.accuracy(w, &all);
        Ok((loss, accuracy))
    }
}

fn rnn_config(p: &ProblemSection) -> RnnConfig {
    let mut cfg = RnnConfig::default();
    if let Some(h) = p.hidden {
        cfg.hidden = h;
    }
    if let Some(l) = p.layers {
        cfg.layers = l;
    }
    if let Some(a) = p.activation {
        cfg.activation = a;
    }
    if let Some(s) = p.init_std {
        cfg.init_std = s;
    }
    cfg
}

/// Detect the cached-corpus format by its magic bytes; anything else is
/// treated as plain UTF-8 text.
fn is_cached_corpus(path: &std::path::Path) -> bool {
    use std::io::Read;
    let mut magic = [0u8; 8];
    match std::fs::File::open(path).and_then(|mut f| f.read_exact(&mut magic)) {
        Ok(()) => &magic == b"ADAQNCRP",
        Err(_) => false,
    }
}

pub fn build_problem(p: &ProblemSection, run_seed: u64) -> Result<ProblemSet> {
    p.validate()?;
    let init_seed = derive_seed(run_seed, SALT_INIT);
    match p.kind.as_str() {
        "quadratic" => {
            let dim = p.dim.unwrap();
            let problem = QuadraticProblem::with_condition(
                dim,
                p.condition.unwrap_or(1e4),
                p.examples.unwrap(),
                p.noise.unwrap_or(0.0),
                p.seed,
            )?;
            Ok(ProblemSet {
                train: BuiltProblem::Quadratic(problem),
                test: None,
                w0: vec![0.0; dim],
            })
        }
        "logistic" => {
            let dim = p.dim.unwrap();
            let problem = LogisticProblem::synthetic(dim, p.examples.unwrap(), p.seed)?;
            Ok(ProblemSet {
                train: BuiltProblem::Logistic(problem),
                test: None,
                w0: vec![0.0; dim],
            })
        }
        "sphere" => Ok(ProblemSet {
            train: BuiltProblem::Sphere(SphereProblem::new(p.dim.unwrap(), p.examples.unwrap())),
            test: None,
            w0: vec![1.0; p.dim.unwrap()],
        }),
        "char_lm" | "word_lm" => {
            let path = p.data.as_ref().unwrap();
            let t_len = p.seq_len.unwrap_or(32);
            let split = p.split.unwrap_or(0.95);
            let (train_ds, test_ds) = if is_cached_corpus(path) {
                let (corpus, cached_t) = load_cached_corpus(path)?;
                if cached_t != t_len && p.seq_len.is_some() {
                    return Err(OptimError::Config(format!(
                        "cached corpus was written with seq_len {cached_t}, config asks for {t_len}"
                    )));
                }
                windows_from_corpus(&corpus, cached_t)?
            } else {
                let mode = if p.kind == "char_lm" {
                    crate::data::TokenMode::Char
                } else {
                    crate::data::TokenMode::Word
                };
                let (_, train, test) = ingest_text(path, mode, t_len, split)?;
                (train, test)
            };
            let cfg = rnn_config(p);
            let train = RnnLmProblem::new(&train_ds, cfg.clone())?;
            let w0 = train.init_params(init_seed);
            let test = if test_ds.is_empty() {
                None
            } else {
                Some(BuiltProblem::Lm(RnnLmProblem::new(&test_ds, cfg)?))
            };
            Ok(ProblemSet {
                train: BuiltProblem::Lm(train),
                test,
                w0,
            })
        }
        "digits" => {
            let count = p.count.unwrap();
            let size = p.size.unwrap_or(8);
            let test_count = p.test_count.unwrap_or_else(|| (count / 5).max(1));
            let train_ds = synth_digits(count, size, p.seed)?;
            let test_ds = synth_digits(test_count, size, derive_seed(p.seed, SALT_TEST_DATA))?;
            let cfg = rnn_config(p);
            let train = PixelSequenceProblem::new(&train_ds, cfg.clone())?;
            let w0 = train.init_params(init_seed);
            Ok(ProblemSet {
                train: BuiltProblem::Digits(train),
                test: Some(BuiltProblem::Digits(PixelSequenceProblem::new(
                    &test_ds, cfg,
                )?)),
                w0,
            })
        }
        other => Err(OptimError::Config(format!("unknown problem kind '{other}'"))),
    }
}

/// Optimizer state unified across methods; serializable so a checkpoint can
/// capture any of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "optimizer", rename_all = "snake_case")]
pub enum Driver {
    Adaqn {
        state: AdaqnState,
    },
    Sgd {
        w: Vec<f64>,
        alpha: f64,
        momentum: Option<MomentumState>,
        iterations: u64,
    },
    Adagrad {
        w: Vec<f64>,
        alpha: f64,
        state: AdagradState,
        iterations: u64,
    },
    Adam {
        w: Vec<f64>,
        alpha: f64,
        state: AdamState,
        iterations: u64,
    },
}

impl Driver {
    /// Build the configured optimizer at `w0`. The monitoring set drives
    /// adaQN's acceptance test; the run loop also uses it for the train-loss
    /// estimate of every optimizer.
    pub fn from_config(
        config: &ExperimentConfig,
        w0: Vec<f64>,
        monitoring: MonitoringSet,
    ) -> Result<Self> {
        let opt = &config.optimizer;
        let alpha = opt.alpha;
        match opt.name.as_str() {
            "adaqn" => {
                let adaqn_config = opt.to_adaqn_config(config.run.batch_size)?;
                let rng_seed = derive_seed(config.run.seed, SALT_MONITOR);
                Ok(Driver::Adaqn {
                    state: AdaqnState::new(w0, adaqn_config, monitoring, rng_seed)?,
                })
            }
            "sgd" => {
                let momentum = match opt.momentum {
                    Some(v) if v > 0.0 => Some(MomentumState::new(&w0, v)?),
                    _ => None,
                };
                Ok(Driver::Sgd {
                    w: w0,
                    alpha,
                    momentum,
                    iterations: 0,
                })
            }
            "adagrad" => Ok(Driver::Adagrad {
                state: AdagradState::new(w0.len(), opt.eps.unwrap_or(1e-4))?,
                w: w0,
                alpha,
                iterations: 0,
            }),
            "adam" => Ok(Driver::Adam {
                state: AdamState::new(
                    w0.len(),
                    opt.beta1.unwrap_or(0.9),
                    opt.beta2.unwrap_or(0.999),
                    opt.eps.unwrap_or(1e-8),
                )?,
                w: w0,
                alpha,
                iterations: 0,
            }),
            other => Err(OptimError::Config(format!("unknown optimizer '{other}'"))),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Driver::Adaqn { state } => &state.w,
            Driver::Sgd { w, .. } | Driver::Adagrad { w, .. } | Driver::Adam { w, .. } => w,
        }
    }

    /// Indices whose loss is reported as the train-loss estimate. For adaQN
    /// this is the live monitoring set (it may rotate); baselines use the
    /// set sampled at startup, held by the run loop.
    pub fn monitoring_indices(&self) -> Option<&[usize]> {
        match self {
            Driver::Adaqn { state } => Some(&state.monitoring.indices),
            _ => None,
        }
    }

    pub fn step(
        &mut self,
        objective: &dyn StochasticObjective,
        batch: &[usize],
    ) -> Result<IterationReport> {
        match self {
            Driver::Adaqn { state } => state.step(objective, batch),
            Driver::Sgd {
                w,
                alpha,
                momentum,
                iterations,
            } => {
                let k = *iterations;
                let (loss, g) = baseline_grad(objective, w, batch, k)?;
                let grad_norm = vecmath::norm(&g);
                sgd_step(w, &g, *alpha, momentum.as_mut())
                    .map_err(|e| e.in_step("sgd step", k))?;
                *iterations += 1;
                Ok(baseline_report(*iterations, loss, grad_norm))
            }
            Driver::Adagrad {
                w,
                alpha,
                state,
                iterations,
            } => {
                let k = *iterations;
                let (loss, g) = baseline_grad(objective, w, batch, k)?;
                let grad_norm = vecmath::norm(&g);
                adagrad_step(state, w, &g, *alpha).map_err(|e| e.in_step("adagrad step", k))?;
                *iterations += 1;
                Ok(baseline_report(*iterations, loss, grad_norm))
            }
            Driver::Adam {
                w,
                alpha,
                state,
                iterations,
            } => {
                let k = *iterations;
                let (loss, g) = baseline_grad(objective, w, batch, k)?;
                let grad_norm = vecmath::norm(&g);
                adam_step(state, w, &g, *alpha).map_err(|e| e.in_step("adam step", k))?;
                *iterations += 1;
                Ok(baseline_report(*iterations, loss, grad_norm))
            }
        }
    }
}

fn baseline_grad(
    objective: &dyn StochasticObjective,
    w: &[f64],
    batch: &[usize],
    k: u64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(OptimError::Config("step: empty batch".into()));
    }
    let (loss, g) = objective
        .value_grad(w, batch)
        .map_err(|e| e.in_step("gradient evaluation", k))?;
    if !loss.is_finite() || !vecmath::all_finite(&g) {
        return Err(OptimError::numerical("nonfinite loss or gradient")
            .in_step("gradient evaluation", k));
    }
    Ok((loss, g))
}

fn baseline_report(iteration: u64, loss: f64, grad_norm: f64) -> IterationReport {
    IterationReport {
        iteration,
        loss,
        grad_norm,
        memory_size: 0,
        fifo_size: 0,
        event: CycleEvent::Plain,
    }
}
