//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by model construction, grids, solvers and kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty medium: {0}")]
    EmptyMedium(String),

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("lambda = {lambda} coincides with grid node {node} under principal-value splitting")]
    SingularNode { lambda: f64, node: f64 },

    #[error("singular placement: {0}")]
    Singular(String),

    #[error("system size N = {n} exceeds the dense cap {cap}; {suggestion}")]
    DenseCap {
        n: usize,
        cap: usize,
        suggestion: String,
    },

    #[error("singular linear system (reciprocal condition estimate {rcond:.3e}): {detail}")]
    SingularSystem { rcond: f64, detail: String },

    #[error("iteration did not converge after {iterations} steps; residual trace {trace:?}")]
    NotConverged { iterations: usize, trace: Vec<f64> },

    #[error("evaluation points inside the medium: rows {0:?}")]
    InteriorPoints(Vec<usize>),

    #[error("column solves failed for labels {0:?}")]
    ColumnFailures(Vec<usize>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::EmptyMedium(_)
                | Error::InteriorPoints(_)
                | Error::Domain(_)
                | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
