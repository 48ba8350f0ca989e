use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing prerequisite: {0}")]
    Missing(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Missing(_) | CliError::Integrity(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<phfsi_core::Error> for CliError {
    fn from(e: phfsi_core::Error) -> Self {
        match e {
            phfsi_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<phfsi_bench::BenchError> for CliError {
    fn from(e: phfsi_bench::BenchError) -> Self {
        use phfsi_bench::BenchError;
        match e {
            BenchError::Core(c) => c.into(),
            BenchError::Config(m) => CliError::Config(m),
            BenchError::Grid(m) => CliError::Numerical(m),
            BenchError::Format { .. } => CliError::Integrity(e.to_string()),
            BenchError::Io(source) => CliError::Io {
                context: "sweep output".into(),
                source,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
