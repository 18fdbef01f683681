use thiserror::Error;

/// Iterate information attached to optimizer failures so callers can still
/// inspect the best point seen before the run gave up.
#[derive(Debug, Clone)]
pub struct BestIterate {
    /// Point with the lowest gradient norm observed so far.
    pub point: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("{what} is not positive definite{}", beta.map(|b| format!(" at beta = {b}")).unwrap_or_default())]
    NotPositiveDefinite { what: String, beta: Option<f64> },

    #[error("design matrix is rank deficient or ill conditioned (cond(X^T X) = {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error(
        "iteration cap reached after {} steps (best gradient norm {:.3e})",
        best.iterations, best.grad_norm
    )]
    IterationCap { best: Box<BestIterate> },

    #[error(
        "optimizer stalled at a projected fixed point after {} steps (gradient norm {:.3e})",
        best.iterations, best.grad_norm
    )]
    Stalled { best: Box<BestIterate> },

    #[error("degree sequence is infeasible: {0}")]
    InfeasibleGraph(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {what}")]
    Parse { path: String, what: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, what: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            what: what.into(),
        }
    }
}
