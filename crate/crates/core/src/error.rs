use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value:e} violates the admissibility bound {bound:e}")]
    Threshold { what: String, value: f64, bound: f64 },

    #[error("overflow guard tripped: {0}")]
    Overflow(String),

    #[error("no sign change of g(M) on [{lo:e}, {hi:e}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("sub-solution inequality violated at node {node} by {violation:e} (tolerance {tolerance:e})")]
    SubSolution { node: usize, violation: f64, tolerance: f64 },

    #[error("super-solution inequality violated at node {node} by {violation:e} (tolerance {tolerance:e})")]
    SuperSolution { node: usize, violation: f64, tolerance: f64 },

    #[error("identity check failed: {0}")]
    Identity(String),

    #[error("expression error at offset {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
