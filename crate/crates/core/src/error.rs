use thiserror::Error;

use crate::homomorphism::HomomorphismReport;
use crate::mdp::FiniteMdp;

pub type Result<T> = std::result::Result<T, MdpError>;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("transition row (state {state}, action {action}) is not a probability vector: {reason}")]
    NonStochasticMatrix {
        state: usize,
        action: usize,
        reason: String,
    },

    #[error("policy row for state {state} is not a probability vector: {reason}")]
    NonStochasticPolicy { state: usize, reason: String },

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error(
        "quotient is inconsistent across preimages (reward error {:.3e}, transition error {:.3e})",
        .report.reward_invariance_error,
        .report.transition_equivariance_error
    )]
    InconsistentQuotient {
        quotient: Box<FiniteMdp>,
        report: HomomorphismReport,
    },

    #[error("marginals are infeasible: {0}")]
    InfeasibleMarginals(String),

    #[error("transport solution failed its optimality certificate: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
