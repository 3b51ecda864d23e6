use thiserror::Error;

use homdp_control::ControlError;
use homdp_core::MdpError;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit code for a run that completed and passed every check.
pub const EXIT_OK: i32 = 0;
/// Exit code when a check or a numerical procedure failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit code for unreadable, malformed, or inconsistent inputs.
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    CheckFailed(String),

    #[error(transparent)]
    Mdp(#[from] MdpError),

    #[error(transparent)]
    Control(#[from] ControlError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::CheckFailed(_) => EXIT_CHECK_FAILED,
            Self::Mdp(e) => match e {
                MdpError::NoConvergence(_)
                | MdpError::InconsistentQuotient { .. }
                | MdpError::Certificate(_) => EXIT_CHECK_FAILED,
                _ => EXIT_INPUT,
            },
            Self::Control(e) => match e {
                ControlError::InvalidConfig(_)
                | ControlError::Io(_)
                | ControlError::Json(_)
                | ControlError::Csv(_) => EXIT_INPUT,
                _ => EXIT_CHECK_FAILED,
            },
            Self::Input(_) | Self::Io { .. } | Self::Json(_) | Self::Csv(_) => EXIT_INPUT,
        }
    }
}
