//! Error types shared across the optimizer, problem, and harness layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    /// Vector lengths disagree. Dimensions are fixed for the lifetime of a
    /// run, so this is a configuration bug, not a recoverable condition.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A NaN or infinity showed up where the contract requires finite values.
    #[error("numerical failure in {context}{}", fmt_index(.index))]
    Numerical {
        context: String,
        /// Offending pair/entry index, when one can be identified.
        index: Option<usize>,
    },

    /// The gradient FIFO is empty, so no curvature product can be formed.
    /// Callers treat the enclosing update cycle as a skip.
    #[error("no curvature information: gradient FIFO is empty")]
    EmptyFifo,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

fn fmt_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (index {i})"),
        None => String::new(),
    }
}

impl OptimError {
    pub fn numerical(context: impl Into<String>) -> Self {
        OptimError::Numerical {
            context: context.into(),
            index: None,
        }
    }

    pub fn numerical_at(context: impl Into<String>, index: usize) -> Self {
        OptimError::Numerical {
            context: context.into(),
            index: Some(index),
        }
    }

    /// Prefix an error with the sub-step and iteration it occurred in, so a
    /// failed run aborts with a usable diagnostic.
    pub fn in_step(self, op: &'static str, iteration: u64) -> Self {
        match self {
            OptimError::Numerical { context, index } => OptimError::Numerical {
                context: format!("{op} at iteration {iteration}: {context}"),
                index,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, OptimError>;
