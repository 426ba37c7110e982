//! Stochastic quasi-Newton optimization built around the adaQN method:
//! L-BFGS two-loop updates whose curvature pairs come from Fisher-information
//! matrix-vector products over averaged iterates, seeded by an Adagrad-style
//! accumulated diagonal, with monitored step rejection to survive noisy
//! curvature. First-order baselines (SGD, momentum, Adagrad, Adam), a problem
//! zoo from ill-conditioned quadratics to recurrent character models, seeded
//! data pipelines, and a config-driven experiment harness share the same
//! kernels so runs are reproducible and their floating-point work is
//! countable.

pub mod adaqn;
pub mod baselines;
pub mod data;
pub mod error;
pub mod fisher;
pub mod flops;
pub mod harness;
pub mod lbfgs;
pub mod problems;
pub mod vecmath;

pub use crate::adaqn::{
    acceptance_check, average_memory_per_epoch, AcceptanceRule, AdaqnConfig, AdaqnState,
    AggregationState, CurvatureSource, CycleEvent, Decision, IterationReport, MonitoringSet,
};
pub use crate::baselines::{
    adagrad_step, adam_step, sgd_step, AdagradState, AdamState, MomentumState,
};
pub use crate::error::{OptimError, Result};
pub use crate::fisher::{
    adagrad_scaling, afim_matvec, efim_matvec, GradientFifo, SquaredGradAccumulator,
};
pub use crate::lbfgs::{
    bfgs_dense_oracle, two_loop_direction, CurvaturePair, DiagonalScaling, LbfgsMemory,
    ParamVector, PushOutcome,
};
pub use crate::problems::StochasticObjective;
