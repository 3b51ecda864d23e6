//! Finite Markov decision processes and their homomorphic images.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: tabular MDPs, policies, and the dynamic-programming solvers
//!   that serve as ground truth for every equivalence check.
//! - [`homomorphism`]: quotient MDPs, policy lifting, value-equivalence
//!   verification, and lax-bisimulation minimization by partition refinement.
//! - [`transport`]: exact optimal transport on finite supports.
//! - [`metrics`]: bisimulation and lax bisimulation metrics as fixed points.
//! - [`generators`]: seeded random and mirrored MDP families.

pub mod error;
pub mod generators;
pub mod homomorphism;
pub mod mdp;
pub mod metrics;
pub mod transport;

pub use error::{MdpError, Result};
pub use homomorphism::{FiniteHomomorphism, HomomorphismReport};
pub use mdp::{FiniteMdp, TabularPolicy, ValueTable};
pub use metrics::MetricTable;
