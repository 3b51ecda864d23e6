use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ContinuousEnv;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const TORQUE_SCALE: f64 = 2.0;
const MAX_SPEED: f64 = 8.0;

/// Odd wrap of an angle onto `[-π, π]`: `wrap_angle(-θ) == -wrap_angle(θ)` bit-for-bit.
pub fn wrap_angle(theta: f64) -> f64 {
    theta - TAU * (theta / TAU).round()
}

/// One semi-implicit Euler step of the frictionless pendulum from `(θ, θ̇)` under
/// normalised torque `action ∈ [-1, 1]`. Returns the next state and the reward
/// `(1 + cos θ) / 2` of the current state. `θ = 0` is upright.
pub fn pendulum_step(state: [f64; 2], action: f64) -> ([f64; 2], f64) {
    let [theta, speed] = state;
    let u = action.clamp(-1.0, 1.0);
    let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * (TORQUE_SCALE * u);
    let next_speed = (speed + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let next_theta = wrap_angle(theta + next_speed * DT);
    ([next_theta, next_speed], (1.0 + theta.cos()) / 2.0)
}

/// The Z2 symmetry on observations: `(cos θ, sin θ, θ̇) → (cos θ, −sin θ, −θ̇)`.
pub fn mirror_observation(obs: &[f64]) -> Vec<f64> {
    vec![obs[0], -obs[1], -obs[2]]
}

/// Pendulum swing-up with 1000-step episodes. `action_noise_std` adds Gaussian noise to the
/// action before clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct Pendulum {
    pub episode_length: usize,
    pub action_noise_std: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            episode_length: 1000,
            action_noise_std: 0.0,
        }
    }
}

impl ContinuousEnv for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn episode_length(&self) -> usize {
        self.episode_length
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-PI..=PI), rng.random_range(-1.0..=1.0)]
    }

    fn step(&self, state: &[f64], action: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let mut a = action[0];
        if self.action_noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            a += self.action_noise_std * z;
        }
        let (next, reward) = pendulum_step([state[0], state[1]], a);
        (next.to_vec(), reward)
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        vec![state[0].cos(), state[0].sin(), state[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reward_at_bottom_and_top() {
        assert_eq!(pendulum_step([PI, 0.0], 0.0).1, 0.0);
        assert_eq!(pendulum_step([0.0, 0.0], 0.0).1, 1.0);
        assert_eq!(pendulum_step([0.0, 0.0], 0.0).0, [0.0, 0.0]);
    }

    #[test]
    fn dynamics_are_exactly_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let theta = rng.random_range(-4.0..4.0);
            let speed = rng.random_range(-9.0..9.0);
            let a = rng.random_range(-1.5..1.5);
            let (next, r) = pendulum_step([theta, speed], a);
            let (mirrored, rm) = pendulum_step([-theta, -speed], -a);
            assert_eq!(mirrored, [-next[0], -next[1]]);
            assert_eq!(r, rm);
        }
    }

    #[test]
    fn wrap_is_odd_and_bounded() {
        for k in -50..=50 {
            let theta = k as f64 * 0.37;
            let w = wrap_angle(theta);
            assert!(w.abs() <= PI);
            assert_eq!(wrap_angle(-theta), -w);
            assert!(((theta - w) / TAU - ((theta - w) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_is_clipped_and_actions_saturate() {
        let (next, _) = pendulum_step([PI / 2.0, 7.9], 1.0);
        assert_eq!(next[1], MAX_SPEED);
        assert_eq!(pendulum_step([0.3, 0.1], 5.0), pendulum_step([0.3, 0.1], 1.0));
    }

    #[test]
    fn observation_mirror_matches_state_negation() {
        let env = Pendulum::default();
        let s = [1.2, -0.4];
        assert_eq!(mirror_observation(&env.observe(&s)), env.observe(&[-s[0], -s[1]]));
    }
}
