use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] transfer_knn::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad input, 2 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &transfer_knn::Error) -> u8 {
    use transfer_knn::Error as E;
    match e {
        E::Cell { source, .. } => core_exit_code(source),
        E::InvalidParameter { .. }
        | E::DimensionMismatch { .. }
        | E::NonFinite { .. }
        | E::NonFiniteLabel { .. }
        | E::EmptyPointSet
        | E::EmptyTraining
        | E::UnsupportedPair(_)
        | E::MissingTransfer(_) => 1,
        _ => 2,
    }
}
