use std::path::PathBuf;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] concate_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("config file {}: {message}", path.display())]
    ConfigFile { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// Process exit status: 2 validation, 3 data or IO, 4 degenerate statistics.
    pub fn exit_code(&self) -> i32 {
        use concate_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Config(_) => EXIT_VALIDATION,
                E::NoOverlap(_) | E::Degenerate(_) | E::EmptyScan(_) => EXIT_DEGENERATE,
                _ => EXIT_DATA,
            },
            CliError::Usage(_) | CliError::ConfigFile { .. } => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Json(_) | CliError::Csv(_) => EXIT_DATA,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
