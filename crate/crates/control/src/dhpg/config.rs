//! Agent hyperparameters and variants.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ControlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// DPG and HPG actor terms summed into one loss.
    DhpgSummed,
    /// DPG and HPG applied as two sequential actor updates.
    DhpgIndependent,
    /// HPG term only.
    DhpgNoDpg,
    /// One critic shared between actual and abstract coordinates.
    DhpgSingleCritic,
    /// Actual critic and DPG only; no homomorphism is learned.
    Ddpg,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::DhpgSummed,
        Variant::DhpgIndependent,
        Variant::DhpgNoDpg,
        Variant::DhpgSingleCritic,
        Variant::Ddpg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DhpgSummed => "dhpg_summed",
            Variant::DhpgIndependent => "dhpg_independent",
            Variant::DhpgNoDpg => "dhpg_no_dpg",
            Variant::DhpgSingleCritic => "dhpg_single_critic",
            Variant::Ddpg => "ddpg",
        }
    }

    /// Whether the abstract MDP (f, g, R̄, τ̄ and an abstract critic) is learned.
    pub fn learns_homomorphism(self) -> bool {
        self != Variant::Ddpg
    }

    pub fn uses_dpg(self) -> bool {
        self != Variant::DhpgNoDpg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ControlError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// `(1 − x)·start + x·end` with `x = min(step / duration, 1)`; both endpoints are exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub duration: u64,
}

impl LinearSchedule {
    pub fn value(&self, step: u64) -> f64 {
        let mix = (step as f64 / self.duration as f64).min(1.0);
        (1.0 - mix) * self.start + mix * self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub n_step: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_delay: u64,
    pub target_update_freq: u64,
    pub noise_clip: f64,
    pub hidden: usize,
    pub buffer_capacity: usize,
    pub seed_frames: u64,
    pub exploration_steps: u64,
    pub exploration_std: LinearSchedule,
    pub action_repeat: u64,
    /// Weight α of the transition term in the lax-bisimulation encoder loss.
    pub lax_weight: f64,
    pub variant: Variant,
    /// Abstract state dimension; `None` keeps the observation dimension.
    pub abstract_state_dim: Option<usize>,
    /// Abstract action dimension; `None` keeps the action dimension.
    pub abstract_action_dim: Option<usize>,
    /// Stop gradients from the next-state term of the model loss into the encoder.
    pub detach_next_state_encoding: bool,
    /// Replace the learned f and g by identities (for testing).
    pub identity_maps: bool,
    /// Deterministic evaluation episodes run at the end of training.
    pub eval_episodes: usize,
    /// Trailing window, in steps, over which the value-equivalence diagnostic is averaged.
    pub diagnostic_window: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            n_step: 3,
            gamma: 0.99,
            tau: 0.01,
            actor_delay: 2,
            target_update_freq: 2,
            noise_clip: 0.3,
            hidden: 256,
            buffer_capacity: 1_000_000,
            seed_frames: 4000,
            exploration_steps: 2000,
            exploration_std: LinearSchedule {
                start: 1.0,
                end: 0.1,
                duration: 1_000_000,
            },
            action_repeat: 1,
            lax_weight: 0.99,
            variant: Variant::DhpgSummed,
            abstract_state_dim: None,
            abstract_action_dim: None,
            detach_next_state_encoding: false,
            identity_maps: false,
            eval_episodes: 10,
            diagnostic_window: 1000,
        }
    }
}

impl AgentConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(ControlError::InvalidConfig(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2 to form pairs");
        }
        if self.n_step == 0 || self.hidden == 0 || self.buffer_capacity == 0 {
            return bad("n_step, hidden and buffer_capacity must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.actor_delay == 0 || self.target_update_freq == 0 || self.action_repeat == 0 {
            return bad("actor_delay, target_update_freq and action_repeat must be positive");
        }
        if !(self.noise_clip >= 0.0) || !(self.lax_weight >= 0.0) {
            return bad("noise_clip and lax_weight must be non-negative");
        }
        let s = self.exploration_std;
        if !(s.start >= 0.0 && s.end >= 0.0) || s.duration == 0 {
            return bad("exploration_std needs non-negative endpoints and a positive duration");
        }
        if self.abstract_state_dim == Some(0) || self.abstract_action_dim == Some(0) {
            return bad("abstract dimensions must be positive");
        }
        if self.identity_maps && (self.abstract_state_dim.is_some() || self.abstract_action_dim.is_some()) {
            return bad("identity maps keep the actual dimensions");
        }
        if self.variant == Variant::DhpgSingleCritic
            && (self.abstract_state_dim.is_some() || self.abstract_action_dim.is_some())
        {
            return bad("a single critic needs abstract dimensions equal to the actual ones");
        }
        if self.eval_episodes == 0 || self.diagnostic_window == 0 {
            return bad("eval_episodes and diagnostic_window must be positive");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exploration_schedule_endpoints() {
        let s = AgentConfig::default().exploration_std;
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(1_000_000), 0.1);
        assert_eq!(s.value(5_000_000), 0.1);
        assert!((s.value(500_000) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn variants_round_trip_through_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert!("td3".parse::<Variant>().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let config: AgentConfig = serde_json::from_str(r#"{"variant": "ddpg", "hidden": 64}"#).unwrap();
        assert_eq!(config.variant, Variant::Ddpg);
        assert_eq!(config.hidden, 64);
        assert_eq!(config.batch_size, 256);
        assert!(serde_json::from_str::<AgentConfig>(r#"{"hiden": 64}"#).is_err());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let mut c = AgentConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::with_variant(Variant::DhpgSingleCritic);
        c.abstract_state_dim = Some(2);
        assert!(c.validate().is_err());
        assert!(AgentConfig::default().validate().is_ok());
    }
}
