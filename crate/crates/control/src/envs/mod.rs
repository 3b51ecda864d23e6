//! Continuous-control environments with known symmetries.
//!
//! Environments are stateless descriptions: the caller owns both the state and the random
//! stream, so a rollout is a pure function of its seed.

pub(crate) mod lqr;
mod pendulum;

pub use lqr::{
    linear_policy_value, lqr_solve, random_invertible, LinearQuadratic, QuadraticValue,
    RICCATI_RESIDUAL_TOL,
};
pub use pendulum::{mirror_observation, pendulum_step, wrap_angle, Pendulum};

use rand_chacha::ChaCha8Rng;

use crate::error::{ControlError, Result};

pub trait ContinuousEnv {
    fn state_dim(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn episode_length(&self) -> usize;
    /// Draws an initial state.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Next state and reward. Actions are clipped to `[-1, 1]` first; any internal noise
    /// is drawn from `rng`.
    fn step(&self, state: &[f64], action: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64);
    /// Agent-facing observation of a state.
    fn observe(&self, state: &[f64]) -> Vec<f64>;
}

pub fn clip_action(action: &[f64]) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
}

/// Environment by name: `pendulum` or `lqr` (a fixed 2-D instance).
pub fn make_env(name: &str) -> Result<Box<dyn ContinuousEnv>> {
    match name {
        "pendulum" => Ok(Box::new(Pendulum::default())),
        "lqr" => Ok(Box::new(LinearQuadratic::random_instance(0, 2, 2, 0.05, 1.0))),
        other => Err(ControlError::InvalidConfig(format!(
            "unknown environment {other:?}; expected pendulum or lqr"
        ))),
    }
}
