use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the solver, spectral lab and IO layers.
#[derive(Debug, Error)]
pub enum VmsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dense size cap exceeded: {size} > {cap}")]
    Size { size: usize, cap: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last increment {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<VmsError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl VmsError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VmsError::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips step wrappers to reach the underlying cause.
    pub fn root(&self) -> &VmsError {
        match self {
            VmsError::Step { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = VmsError> = std::result::Result<T, E>;
