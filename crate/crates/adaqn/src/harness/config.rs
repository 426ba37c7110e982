//! Experiment configuration: one TOML document per experiment with
//! `[problem]`, `[optimizer]`, and `[run]` tables (plus optional `[grid]`
//! and `[audit]` tables for those subcommands). Unknown keys are rejected
//! by the deserializer; keys that exist but do not apply to the selected
//! problem kind or optimizer are rejected by validation, so a misplaced
//! hyper-parameter never silently does nothing.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaqn::{AcceptanceRule, AdaqnConfig, CurvatureSource};
use crate::error::{OptimError, Result};
use crate::problems::Activation;

/// Environment variable that re-roots relative output paths.
pub const OUT_DIR_ENV: &str = "ADAQN_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub optimizer: OptimizerSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// quadratic | logistic | sphere | char_lm | word_lm | digits
    pub kind: String,
    /// Data-generation seed (synthetic problems) — independent of run.seed.
    #[serde(default = "default_seed")]
    pub seed: u64,

    // Language-model problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,

    // Recurrent-network architecture (LM and digits).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_std: Option<f64>,

    // Synthetic vector problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub examples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,

    // Digit sequences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// adaqn | sgd | adagrad | adam
    pub name: String,
    pub alpha: f64,

    // adaQN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fifo_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_skip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotate_monitoring: Option<bool>,

    // SGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,

    // Adam / Adagrad.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Epochs between metric records (a final-epoch record is always written).
    #[serde(default = "default_one")]
    pub eval_every: usize,
    /// Epochs between mid-run checkpoints; 0 = final checkpoint only.
    #[serde(default)]
    pub checkpoint_every: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_lengths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_audit_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_audit_iterations")]
    pub iterations: usize,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            sizes: default_audit_sizes(),
            iterations: default_audit_iterations(),
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_batch() -> usize {
    32
}
fn default_one() -> usize {
    1
}
fn default_audit_sizes() -> Vec<usize> {
    vec![1_000, 10_000, 100_000]
}
fn default_audit_iterations() -> usize {
    50
}

fn config_err(msg: impl Into<String>) -> OptimError {
    OptimError::Config(msg.into())
}

/// Reject config keys that do not apply to the selected kind/name.
macro_rules! forbid {
    ($section:literal, $selected:expr, $($field:expr => $name:literal),+ $(,)?) => {
        $(if $field.is_some() {
            return Err(config_err(format!(
                concat!($section, ".", $name, " does not apply to '{}'"),
                $selected
            )));
        })+
    };
}

impl ProblemSection {
    pub fn validate(&self) -> Result<()> {
        match self.kind.as_str() {
            "quadratic" => {
                forbid!("problem", self.kind,
                    self.data => "data", self.seq_len => "seq_len", self.split => "split",
                    self.hidden => "hidden", self.layers => "layers",
                    self.activation => "activation", self.init_std => "init_std",
                    self.count => "count", self.test_count => "test_count", self.size => "size");
                self.require_dim_examples()?;
                if let Some(c) = self.condition {
                    if !(c >= 1.0 && c.is_finite()) {
                        return Err(config_err("problem.condition must be >= 1"));
                    }
                }
                if let Some(s) = self.noise {
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(config_err("problem.noise must be >= 0"));
                    }
                }
            }
            "logistic" | "sphere" => {
                forbid!("problem", self.kind,
                    self.data => "data", self.seq_len => "seq_len", self.split => "split",
                    self.hidden => "hidden", self.layers => "layers",
                    self.activation => "activation", self.init_std => "init_std",
                    self.condition => "condition", self.noise => "noise",
                    self.count => "count", self.test_count => "test_count", self.size => "size");
                self.require_dim_examples()?;
            }
            "char_lm" | "word_lm" => {
                forbid!("problem", self.kind,
                    self.dim => "dim", self.examples => "examples",
                    self.condition => "condition", self.noise => "noise",
                    self.count => "count", self.test_count => "test_count", self.size => "size");
                if self.data.is_none() {
                    return Err(config_err("problem.data (corpus path) is required for LM runs"));
                }
                if let Some(s) = self.split {
                    if !(0.0 < s && s <= 1.0) {
                        return Err(config_err("problem.split must lie in (0, 1]"));
                    }
                }
                self.check_rnn_fields()?;
            }
            "digits" => {
                forbid!("problem", self.kind,
                    self.data => "data", self.seq_len => "seq_len", self.split => "split",
                    self.dim => "dim", self.examples => "examples",
                    self.condition => "condition", self.noise => "noise");
                if self.count.unwrap_or(0) == 0 {
                    return Err(config_err("problem.count must be >= 1 for digits"));
                }
                self.check_rnn_fields()?;
            }
            other => {
                return Err(config_err(format!(
                    "unknown problem kind '{other}' (expected quadratic, logistic, sphere, char_lm, word_lm, or digits)"
                )));
            }
        }
        Ok(())
    }

    fn require_dim_examples(&self) -> Result<()> {
        if self.dim.unwrap_or(0) == 0 {
            return Err(config_err(format!("problem.dim is required for {}", self.kind)));
        }
        if self.examples.unwrap_or(0) == 0 {
            return Err(config_err(format!(
                "problem.examples is required for {}",
                self.kind
            )));
        }
        Ok(())
    }

    fn check_rnn_fields(&self) -> Result<()> {
        if self.hidden == Some(0) {
            return Err(config_err("problem.hidden must be >= 1"));
        }
        if self.layers == Some(0) {
            return Err(config_err("problem.layers must be >= 1"));
        }
        if let Some(s) = self.init_std {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_err("problem.init_std must be positive"));
            }
        }
        Ok(())
    }
}

impl OptimizerSection {
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(config_err("optimizer.alpha must be positive finite"));
        }
        match self.name.as_str() {
            "adaqn" => {
                forbid!("optimizer", self.name,
                    self.momentum => "momentum", self.beta1 => "beta1",
                    self.beta2 => "beta2", self.eps => "eps");
                // Experiment configs must use a meaningful rejection factor.
                self.to_adaqn_config(batch_size)?.validate()
            }
            "sgd" => {
                self.forbid_adaqn_keys()?;
                forbid!("optimizer", self.name,
                    self.beta1 => "beta1", self.beta2 => "beta2", self.eps => "eps");
                if let Some(v) = self.momentum {
                    if !(v >= 0.0 && v < 1.0) {
                        return Err(config_err("optimizer.momentum must lie in [0, 1)"));
                    }
                }
                Ok(())
            }
            "adagrad" => {
                self.forbid_adaqn_keys()?;
                forbid!("optimizer", self.name,
                    self.momentum => "momentum", self.beta1 => "beta1", self.beta2 => "beta2");
                if let Some(e) = self.eps {
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(config_err("optimizer.eps must be positive"));
                    }
                }
                Ok(())
            }
            "adam" => {
                self.forbid_adaqn_keys()?;
                forbid!("optimizer", self.name, self.momentum => "momentum");
                for (v, name) in [(self.beta1, "beta1"), (self.beta2, "beta2")] {
                    if let Some(b) = v {
                        if !(0.0..1.0).contains(&b) {
                            return Err(config_err(format!(
                                "optimizer.{name} must lie in [0, 1)"
                            )));
                        }
                    }
                }
                if let Some(e) = self.eps {
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(config_err("optimizer.eps must be positive"));
                    }
                }
                Ok(())
            }
            other => Err(config_err(format!(
                "unknown optimizer '{other}' (expected adaqn, sgd, adagrad, or adam)"
            ))),
        }
    }

    fn forbid_adaqn_keys(&self) -> Result<()> {
        forbid!("optimizer", self.name,
            self.cycle_length => "cycle_length", self.memory_size => "memory_size",
            self.fifo_size => "fifo_size", self.eps_skip => "eps_skip",
            self.eps_scale => "eps_scale", self.gamma => "gamma",
            self.gamma_tilde => "gamma_tilde", self.curvature => "curvature",
            self.rotate_monitoring => "rotate_monitoring");
        Ok(())
    }

    /// Resolve the adaQN section into the library config (adaqn runs only).
    pub fn to_adaqn_config(&self, batch_size: usize) -> Result<AdaqnConfig> {
        let acceptance = match (self.gamma, self.gamma_tilde) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "optimizer.gamma and optimizer.gamma_tilde are mutually exclusive",
                ))
            }
            (Some(g), None) => AcceptanceRule::AbsoluteFactor { gamma: g },
            (None, Some(gt)) => AcceptanceRule::RelativeImprovement { gamma_tilde: gt },
            (None, None) => AcceptanceRule::default(),
        };
        let defaults = AdaqnConfig::default();
        Ok(AdaqnConfig {
            alpha: self.alpha,
            cycle_length: self.cycle_length.unwrap_or(defaults.cycle_length),
            memory_size: self.memory_size.unwrap_or(defaults.memory_size),
            fifo_size: self.fifo_size.unwrap_or(defaults.fifo_size),
            eps_skip: self.eps_skip.unwrap_or(defaults.eps_skip),
            eps_scale: self.eps_scale.unwrap_or(defaults.eps_scale),
            batch_size,
            acceptance,
            curvature: self.curvature.unwrap_or(defaults.curvature),
            rotate_monitoring: self.rotate_monitoring.unwrap_or(false),
        })
    }
}

impl RunSection {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err("run.batch_size must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(config_err("run.eval_every must be >= 1"));
        }
        if self.out.as_os_str().is_empty() {
            return Err(config_err("run.out must be a nonempty path"));
        }
        Ok(())
    }

    /// Output directory with the environment override applied: relative
    /// paths resolve against `ADAQN_OUT_DIR` when it is set.
    pub fn resolved_out(&self) -> PathBuf {
        if self.out.is_absolute() {
            return self.out.clone();
        }
        match env::var_os(OUT_DIR_ENV) {
            Some(base) if !base.is_empty() => PathBuf::from(base).join(&self.out),
            _ => self.out.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.run.validate()?;
        self.optimizer.validate(self.run.batch_size)?;
        if let Some(grid) = &self.grid {
            if grid.alphas.is_empty() {
                return Err(config_err("grid.alphas must be nonempty"));
            }
            if grid.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(config_err("grid.alphas must all be positive finite"));
            }
            match &grid.cycle_lengths {
                Some(ls) if self.optimizer.name != "adaqn" => {
                    let _ = ls;
                    return Err(config_err(
                        "grid.cycle_lengths applies only to the adaqn optimizer",
                    ));
                }
                Some(ls) if ls.is_empty() || ls.contains(&0) => {
                    return Err(config_err("grid.cycle_lengths must be nonempty and >= 1"));
                }
                _ => {}
            }
        }
        if let Some(audit) = &self.audit {
            if audit.sizes.is_empty() || audit.sizes.contains(&0) {
                return Err(config_err("audit.sizes must be nonempty and >= 1"));
            }
            if audit.iterations == 0 {
                return Err(config_err("audit.iterations must be >= 1"));
            }
        }
        Ok(())
    }

    /// Whether a checkpoint produced under `previous` can continue under
    /// `self`: everything that shapes the trajectory must match; only the
    /// epoch budget and checkpoint cadence may change.
    pub fn resume_compatible(&self, previous: &ExperimentConfig) -> Result<()> {
        if self.problem != previous.problem {
            return Err(config_err("resume: problem section differs from checkpoint"));
        }
        if self.optimizer != previous.optimizer {
            return Err(config_err(
                "resume: optimizer section differs from checkpoint",
            ));
        }
        if self.run.seed != previous.run.seed
            || self.run.batch_size != previous.run.batch_size
            || self.run.eval_every != previous.run.eval_every
        {
            return Err(config_err(
                "resume: run seed, batch size, and eval cadence must match the checkpoint",
            ));
        }
        Ok(())
    }
}

/// Stable per-purpose seed derivation (splitmix64 finalizer), so the batch
/// schedule, monitoring set, and parameter initialization never share a
/// generator stream even though the config carries a single seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
