//! CLI error with the exit-code contract: 1 usage/config, 2 data, 3 numeric.

use csids_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct AppError {
    pub message: String,
    pub code: i32,
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError {
            message: message.into(),
            code: 1,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        AppError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::InvalidParameter { .. } | CoreError::InvalidCostMatrix(_) => 1,
            CoreError::Divergence { .. }
            | CoreError::DegeneratePosterior
            | CoreError::NonFinite(_)
            | CoreError::AllCandidatesFailed(_) => 3,
            _ => 2,
        };
        AppError {
            message: err.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> Self {
        AppError::data(err.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(err: serde_json::Error) -> Self {
        AppError::data(err.to_string())
    }
}
