use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Metrics(#[from] malthus_core::Error),
}

impl BenchError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Invariant(_) => 3,
            BenchError::Metrics(malthus_core::Error::UnknownLock(_)) => 1,
            BenchError::Metrics(
                malthus_core::Error::DuplicateOrdinal(_)
                | malthus_core::Error::OrdinalGap { .. }
                | malthus_core::Error::ThreadOutOfRange { .. },
            ) => 3,
            _ => 2,
        }
    }
}
