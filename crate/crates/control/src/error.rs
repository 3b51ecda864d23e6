use thiserror::Error;

use homdp_autodiff::AutodiffError;

pub type Result<T> = std::result::Result<T, ControlError>;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Riccati iteration diverged: {0}")]
    RiccatiDivergence(String),

    #[error("action map Jacobian is singular: {0}")]
    SingularJacobian(String),

    #[error("non-finite value during training: {0}")]
    NumericalDivergence(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
