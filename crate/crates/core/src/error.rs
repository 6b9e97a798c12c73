// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io;

use thiserror::Error;

/// Errors produced by the attribution library.
#[derive(Debug, Error)]
pub enum GigError {
    /// An input vector does not have the dimension the model or path expects.
    #[error("input shape mismatch: expected {expected} values, got {actual}")]
    InputShape { expected: usize, actual: usize },

    /// A scalar target names a class the model does not have.
    #[error("invalid target class {class} for a model with {classes} classes")]
    Target { class: usize, classes: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    /// The variational path optimizer produced a non-finite objective.
    #[error("path optimization diverged at iteration {iteration}")]
    ElboDivergence { iteration: usize },

    /// Source and sink lie in different connected components.
    #[error("nodes {source_node} and {sink} are not connected")]
    Disconnected { source_node: usize, sink: usize },

    /// A fixture that should be symmetric in two features is not.
    #[error("fixture is not symmetric: |f(x1,x2) - f(x2,x1)| = {0:e}")]
    Fixture(f64),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = GigError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(GigError::InputShape { expected, actual })
    }
}
