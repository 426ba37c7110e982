//! Experiment harness: config files in, metrics files out.
//!
//! A run is described by one TOML document (problem + optimizer + run
//! sections). The harness builds the problem, drives the configured
//! optimizer through seeded epoch schedules, and records one JSON object
//! per evaluation point, plus checkpoints that make the whole thing
//! resumable. `grid` sweeps step sizes (and cycle lengths for adaQN), and
//! `audit` measures the per-iteration operation counts against the cost
//! model.

pub mod audit;
pub mod config;
pub mod driver;
pub mod grid;
pub mod metrics;
pub mod runner;

pub use audit::{flop_audit, write_audit, AuditReport};
pub use config::{derive_seed, ExperimentConfig, OUT_DIR_ENV};
pub use driver::{build_problem, Driver, ProblemSet};
pub use grid::{grid_search, GridSummary};
pub use metrics::{
    inspect_report, read_metrics, write_csv, MetricsHeader, MetricsRecord, MetricsWriter,
};
pub use runner::{run_experiment, RunOutcome};
