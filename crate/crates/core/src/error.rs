use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mesh is not admissible: {0}")]
    NotAdmissible(String),

    #[error("fields live on different meshes (lengths {left} and {right})")]
    MeshMismatch { left: usize, right: usize },

    #[error("linear solve failed: relative residual {residual:e} exceeds {tolerance:e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    #[error("zero pivot at row {row} during factorization")]
    ZeroPivot { row: usize },

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error("root bracketing failed on [{lo}, {hi}]: found {found} of {wanted} roots")]
    Bracketing {
        lo: f64,
        hi: f64,
        found: usize,
        wanted: usize,
    },

    #[error("not converged after {iterations} iterations: residual {residual:e} above {tolerance:e}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("eigenvalue iteration did not converge: {0}")]
    EigenNonConvergence(String),

    /// `line` is 1-based; 0 when the problem is not tied to a line.
    #[error("config error{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } => true,
            Error::Stage { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
