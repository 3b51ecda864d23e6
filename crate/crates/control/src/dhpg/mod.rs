//! Deep homomorphic policy gradient agent for state observations, and its DDPG baseline.
//!
//! Each update minimises the actual and abstract TD losses together with the encoder loss
//! (a regression of `‖f(s_i) − f(s_j)‖₁` onto the lax distance) and the abstract-model loss.
//! The actor follows the DPG gradient, the HPG gradient through `(f, g)`, or both.

pub mod agent;
pub mod config;
pub mod replay;
pub mod train;

pub use agent::{ActorTerms, Agent, AuxDraws, Losses, UpdateInfo};
pub use config::{AgentConfig, LinearSchedule, Variant};
pub use replay::{Batch, ReplayBuffer};
pub use train::{evaluate, pendulum_symmetry_report, train, RunSummary, StepRow, SymmetryReport};
