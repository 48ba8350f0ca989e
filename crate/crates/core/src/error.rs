use thiserror::Error;

/// Errors raised by model assembly, integration and reduction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("integration failed (dt = {dt:e}): {reason}")]
    Integration { dt: f64, reason: String },

    #[error("state norm {norm:e} exceeded the divergence limit at step {step}")]
    Diverged { step: usize, norm: f64 },

    #[error("singular shift s0 = {re:e} + {im:e}i")]
    SingularShift { re: f64, im: f64 },

    #[error("requested {requested} modes but the data has numerical rank {rank}")]
    InsufficientRank { requested: usize, rank: usize },

    #[error("malformed matrix market data: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
