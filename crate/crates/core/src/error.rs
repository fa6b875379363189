use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format version: {0}")]
    Version(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("all snapshots are zero (trace of correlation matrix vanishes)")]
    ZeroTrace,

    #[error("mode count r = {r} out of range 1..={n}")]
    ModeCount { r: usize, n: usize },

    #[error("morphing has {count} inverted elements")]
    Inverted { count: usize },

    #[error("backtracking exhausted at iteration {iteration} after {attempts} step halvings")]
    BacktrackingExhausted {
        iteration: usize,
        attempts: usize,
        trace: Box<crate::optim::OptimizerTrace>,
    },

    #[error("{0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverDiverged { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::ZeroTrace
                | Error::Inverted { .. }
                | Error::BacktrackingExhausted { .. }
                | Error::Numerical(_)
        )
    }
}
