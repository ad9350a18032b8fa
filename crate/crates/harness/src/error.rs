use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] malibo::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn csv(path: impl AsRef<std::path::Path>, source: csv::Error) -> Self {
        HarnessError::Csv { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        use malibo::Error as E;
        match self {
            HarnessError::Validation(_) | HarnessError::Json(_) => 1,
            HarnessError::Core(e) => match e {
                E::InvalidSpace(_)
                | E::OutOfBounds { .. }
                | E::Arity { .. }
                | E::Empty(_)
                | E::InvalidArgument(_)
                | E::CheckpointVersion(_)
                | E::Parse { .. }
                | E::Json(_) => 1,
                E::NonFinite(_) | E::Diverged { .. } | E::Cholesky { .. } | E::Io { .. } => 2,
            },
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 2,
        }
    }
}
