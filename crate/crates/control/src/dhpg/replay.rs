//! Ring-buffer replay with n-step returns assembled at sample time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ControlError, Result};

/// A batch in row-major layout, `batch × dim` per field.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    /// `Σ_{i<m} γ^i r_{t+i}` with `m ≤ n` truncated at the episode end and the write head.
    pub n_step_return: Vec<f64>,
    /// `γ^m` for the bootstrap at `bootstrap_obs`.
    pub discount: Vec<f64>,
    pub bootstrap_obs: Vec<f64>,
    /// One-step reward `r_t` and next observation `s_{t+1}`.
    pub reward: Vec<f64>,
    pub next_obs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    obs: Vec<f64>,
    action: Vec<f64>,
    reward: Vec<f64>,
    next_obs: Vec<f64>,
    /// The transition ends its episode.
    last: Vec<bool>,
    /// Transitions ever written; transition `t` lives in slot `t % capacity`.
    written: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            action_dim,
            obs: Vec::new(),
            action: Vec::new(),
            reward: Vec::new(),
            next_obs: Vec::new(),
            last: Vec::new(),
            written: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.written.min(self.capacity)
    }

    pub fn is_empty(&self) -> bool {
        self.written == 0
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], episode_end: bool) -> Result<()> {
        if obs.len() != self.obs_dim || next_obs.len() != self.obs_dim || action.len() != self.action_dim {
            return Err(ControlError::ShapeMismatch(format!(
                "transition with observation {}/{} and action {}, buffer expects {} and {}",
                obs.len(),
                next_obs.len(),
                action.len(),
                self.obs_dim,
                self.action_dim
            )));
        }
        if self.written < self.capacity {
            self.obs.extend_from_slice(obs);
            self.action.extend_from_slice(action);
            self.reward.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.last.push(episode_end);
        } else {
            let slot = self.written % self.capacity;
            self.obs[slot * self.obs_dim..(slot + 1) * self.obs_dim].copy_from_slice(obs);
            self.action[slot * self.action_dim..(slot + 1) * self.action_dim].copy_from_slice(action);
            self.reward[slot] = reward;
            self.next_obs[slot * self.obs_dim..(slot + 1) * self.obs_dim].copy_from_slice(next_obs);
            self.last[slot] = episode_end;
        }
        self.written += 1;
        Ok(())
    }

    fn slot(&self, t: usize) -> usize {
        t % self.capacity
    }

    /// n-step return, bootstrap discount and bootstrap slot for absolute index `t`.
    fn n_step(&self, t: usize, n: usize, gamma: f64) -> (f64, f64, usize) {
        let (mut ret, mut discount) = (0.0, 1.0);
        let mut end = t;
        for i in 0..n {
            let u = t + i;
            if u >= self.written {
                break;
            }
            let slot = self.slot(u);
            ret += discount * self.reward[slot];
            discount *= gamma;
            end = u;
            if self.last[slot] {
                break;
            }
        }
        (ret, discount, self.slot(end))
    }

    /// Uniformly sampled batch of stored transitions.
    pub fn sample(&self, batch_size: usize, n: usize, gamma: f64, rng: &mut ChaCha8Rng) -> Result<Batch> {
        if self.is_empty() {
            return Err(ControlError::InvalidConfig("cannot sample from an empty replay buffer".into()));
        }
        let oldest = self.written - self.len();
        let indices: Vec<usize> = (0..batch_size).map(|_| rng.random_range(oldest..self.written)).collect();
        Ok(self.gather(&indices, n, gamma))
    }

    /// Batch at the given absolute transition indices.
    pub fn gather(&self, indices: &[usize], n: usize, gamma: f64) -> Batch {
        let (od, ad) = (self.obs_dim, self.action_dim);
        let mut batch = Batch {
            size: indices.len(),
            obs: Vec::with_capacity(indices.len() * od),
            action: Vec::with_capacity(indices.len() * ad),
            n_step_return: Vec::with_capacity(indices.len()),
            discount: Vec::with_capacity(indices.len()),
            bootstrap_obs: Vec::with_capacity(indices.len() * od),
            reward: Vec::with_capacity(indices.len()),
            next_obs: Vec::with_capacity(indices.len() * od),
        };
        for &t in indices {
            let slot = self.slot(t);
            let (ret, discount, end) = self.n_step(t, n, gamma);
            batch.obs.extend_from_slice(&self.obs[slot * od..(slot + 1) * od]);
            batch.action.extend_from_slice(&self.action[slot * ad..(slot + 1) * ad]);
            batch.n_step_return.push(ret);
            batch.discount.push(discount);
            batch.bootstrap_obs.extend_from_slice(&self.next_obs[end * od..(end + 1) * od]);
            batch.reward.push(self.reward[slot]);
            batch.next_obs.extend_from_slice(&self.next_obs[slot * od..(slot + 1) * od]);
        }
        batch
    }

    /// Absolute indices currently stored.
    pub fn stored_range(&self) -> std::ops::Range<usize> {
        self.written - self.len()..self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    proptest! {
        #[test]
        fn n_step_returns_match_brute_force(
            lengths in prop::collection::vec(1usize..8, 1..5),
            n in 1usize..5,
            capacity in 3usize..40,
        ) {
            let gamma = 0.9;
            let mut buffer = ReplayBuffer::new(capacity, 1, 1);
            let mut rewards = Vec::new();
            let mut episode_of = Vec::new();
            for (e, &len) in lengths.iter().enumerate() {
                for k in 0..len {
                    let t = rewards.len();
                    let r = (t * 7 % 11) as f64 - 3.0;
                    buffer.push(&[t as f64], &[0.0], r, &[t as f64 + 1.0], k + 1 == len).unwrap();
                    rewards.push(r);
                    episode_of.push(e);
                }
            }
            let range = buffer.stored_range();
            let indices: Vec<usize> = range.clone().collect();
            let batch = buffer.gather(&indices, n, gamma);
            for (row, &t) in indices.iter().enumerate() {
                let mut expected = 0.0;
                let mut m = 0;
                while m < n && t + m < rewards.len() && episode_of[t + m] == episode_of[t] {
                    expected += gamma.powi(m as i32) * rewards[t + m];
                    m += 1;
                }
                prop_assert_eq!(batch.n_step_return[row], expected);
                prop_assert_eq!(batch.discount[row], gamma.powi(m as i32));
                prop_assert_eq!(batch.bootstrap_obs[row], (t + m) as f64);
                prop_assert_eq!(batch.obs[row], t as f64);
                prop_assert_eq!(batch.next_obs[row], t as f64 + 1.0);
            }
        }
    }

    #[test]
    fn sampling_stays_inside_the_ring() {
        let mut buffer = ReplayBuffer::new(5, 1, 1);
        for t in 0..12 {
            buffer.push(&[t as f64], &[0.0], 0.0, &[0.0], false).unwrap();
        }
        assert_eq!(buffer.len(), 5);
        let batch = buffer.sample(200, 1, 0.99, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(batch.obs.iter().all(|&o| (7.0..12.0).contains(&o)));
    }

    #[test]
    fn mismatched_transitions_are_rejected() {
        let mut buffer = ReplayBuffer::new(5, 2, 1);
        assert!(buffer.push(&[0.0], &[0.0], 0.0, &[0.0, 0.0], false).is_err());
    }
}
