use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A parameter was rejected by the model, or a computation failed.
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: pmsfwm_core::Error,
    },

    /// A request the command cannot honor (unknown sweep parameter, bad range).
    #[error("{0}")]
    Usage(String),

    /// Config or CSV text that does not match the expected layout.
    #[error("{0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn model(context: impl Into<String>, source: pmsfwm_core::Error) -> Self {
        CliError::Model {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for validation and computation failures, 2 for I/O and schema failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model { .. } | CliError::Usage(_) => 1,
            CliError::Schema(_) | CliError::Io { .. } => 2,
        }
    }
}
