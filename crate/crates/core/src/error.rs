use thiserror::Error;

/// Errors produced by lattice, weight and operator construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),

    #[error("cell {cell}: matrix is not Hermitian (asymmetry {asymmetry:.3e} > 1e-12)")]
    NotHermitian { cell: usize, asymmetry: f64 },

    #[error("cell {cell}: weight is not positive definite (min eigenvalue {eigenvalue:.3e})")]
    NotPositiveDefinite { cell: usize, eigenvalue: f64 },

    #[error("cell {cell}: weight condition number {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { cell: usize, cond: f64, cap: f64 },

    #[error("size mismatch: {context} expected {expected}, got {got}")]
    SizeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("grids disagree: {0}")]
    GridMismatch(&'static str),

    #[error("reducing matrix failed on cube {cube}: {reason}")]
    ReducingFailure { cube: String, reason: String },

    #[error("stopping-time threshold lambda exceeded cap {cap} without achieving decay")]
    LambdaCapExceeded { cap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("power-type exponent alpha={alpha} is outside (-d, d(p-1)) = ({lo}, {hi}) for p={p}")]
    AlphaOutOfRange { alpha: f64, p: f64, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
