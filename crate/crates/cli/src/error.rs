use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unparseable or invalid scenario. `field` is the dotted config path.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("analysis did not converge: {0}")]
    Convergence(sagnac_core::Error),

    #[error("reproduction mismatch in {} row(s): {}", .0.len(), .0.join("; "))]
    Mismatch(Vec<String>),

    #[error(transparent)]
    Core(sagnac_core::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 0 ok, 1 other, 2 configuration, 3 convergence, 4 reproduction mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Convergence(_) => 3,
            Self::Mismatch(_) => 4,
            Self::Core(_) | Self::Io { .. } => 1,
        }
    }
}

impl From<sagnac_core::Error> for CliError {
    fn from(e: sagnac_core::Error) -> Self {
        match e {
            sagnac_core::Error::Convergence { .. } | sagnac_core::Error::BootstrapFailed { .. } => Self::Convergence(e),
            sagnac_core::Error::Configuration(ref m) => Self::config("configuration", m.clone()),
            other => Self::Core(other),
        }
    }
}
