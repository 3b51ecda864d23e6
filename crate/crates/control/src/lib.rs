//! Continuous control with MDP homomorphisms.
//!
//! - [`envs`]: pendulum swing-up with its Z2 symmetry, and linear-quadratic systems whose
//!   coordinate changes are exact homomorphisms.
//! - [`grad_equiv`]: numerical checks that values and deterministic policy gradients agree
//!   between an MDP and its homomorphic image.
//! - [`dhpg`]: the deep homomorphic policy gradient agent and its DDPG baseline.

pub mod dhpg;
pub mod envs;
pub mod error;
pub mod grad_equiv;

pub use error::{ControlError, Result};
