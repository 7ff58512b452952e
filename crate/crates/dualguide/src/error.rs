use std::path::PathBuf;

use dualguide_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Malformed input file, with the offending line when known.
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("analysis: {0}")]
    Analysis(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 runtime contract, 4 analysis, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Core(e) => match e {
                CoreError::Config(_)
                | CoreError::Range { .. }
                | CoreError::Domain(_)
                | CoreError::Infeasible { .. } => 2,
                CoreError::Contract(_)
                | CoreError::Invariant(_)
                | CoreError::EmptySupport
                | CoreError::Replay(_) => 3,
                CoreError::Analysis(_) | CoreError::Trace(_) => 4,
            },
            AppError::Parse { .. } | AppError::Analysis(_) => 4,
            AppError::Io { .. } | AppError::Csv(_) => 1,
        }
    }
}
