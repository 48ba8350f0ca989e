use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] phfsi_core::Error),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error("trajectories are on different grids: {0}")]
    Grid(String),

    #[error("malformed record file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
