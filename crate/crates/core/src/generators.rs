//! Seeded MDP families used by tests, the acceptance suite, and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::homomorphism::FiniteHomomorphism;
use crate::mdp::FiniteMdp;

fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Dense random MDP: transition rows drawn uniformly and normalised, rewards in [-1, 1].
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, gamma: f64) -> FiniteMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
    let mut rewards = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        for _ in 0..n_actions {
            transitions.extend(random_distribution(&mut rng, n_states));
            rewards.push(rng.random_range(-1.0..=1.0));
        }
    }
    FiniteMdp::from_flat(n_states, n_actions, transitions, rewards, gamma)
        .expect("generated MDP is well formed")
}

/// Builds a Z2-symmetric MDP from `base`: states `s` and `s + n` mirror each other, and
/// action `a` in the second copy is relabelled to `n_actions - 1 - a`.
///
/// With `coupled = true` every transition splits its mass between a target and its mirror
/// image with a random weight, so the copies interact; otherwise the copies are disjoint.
/// Returns the symmetric MDP and the collapse homomorphism onto `base`'s state space.
pub fn mirrored_mdp(base: &FiniteMdp, seed: u64, coupled: bool) -> (FiniteMdp, FiniteHomomorphism) {
    let n = base.n_states();
    let na = base.n_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flip = |a: usize| na - 1 - a;
    let total = 2 * n;
    let mut transitions = vec![0.0; total * na * total];
    let mut rewards = vec![0.0; total * na];
    for s in 0..n {
        for a in 0..na {
            let row = base.transition_row(s, a);
            let lower = (s * na + a) * total;
            let upper = ((s + n) * na + flip(a)) * total;
            for (t, &p) in row.iter().enumerate() {
                let w = if coupled { rng.random::<f64>() } else { 1.0 };
                let stay = p * w;
                let cross = p - stay;
                transitions[lower + t] = stay;
                transitions[lower + t + n] = cross;
                transitions[upper + t + n] = stay;
                transitions[upper + t] = cross;
            }
            rewards[s * na + a] = base.reward(s, a);
            rewards[(s + n) * na + flip(a)] = base.reward(s, a);
        }
    }
    let mdp = FiniteMdp::from_flat(total, na, transitions, rewards, base.gamma())
        .expect("mirrored MDP is well formed");
    let state_map = (0..total).map(|s| s % n).collect();
    let action_maps = (0..total)
        .map(|s| {
            if s < n {
                (0..na).collect()
            } else {
                (0..na).map(flip).collect()
            }
        })
        .collect();
    let hom = FiniteHomomorphism::new(state_map, action_maps).expect("collapse map is surjective");
    (mdp, hom)
}

/// Uniformly random stochastic policy.
pub fn random_policy(seed: u64, n_states: usize, n_actions: usize) -> crate::mdp::TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_states)
        .map(|_| random_distribution(&mut rng, n_actions))
        .collect();
    crate::mdp::TabularPolicy::new(rows).expect("random rows are stochastic")
}

/// Discretised pendulum angle on a ring of `n_states` grid points with torques evenly spaced
/// in `[-1, 1]`. The grid, action set, dynamics, and reward are all symmetric under
/// `θ → −θ, a → −a`, and the mirror image of every transition row is written explicitly so
/// the symmetry holds bit-for-bit. Reward is `(1 + cos θ) / 2`.
pub fn symmetric_ring_mdp(n_states: usize, n_actions: usize, gamma: f64) -> FiniteMdp {
    assert!(n_states >= 1 && n_actions >= 1);
    let n = n_states;
    let spacing = std::f64::consts::TAU / n as f64;
    let centre = (n as f64 - 1.0) / 2.0;
    let angle = |i: usize| (i as f64 - centre) * spacing;
    let torque = |j: usize| {
        if n_actions == 1 {
            0.0
        } else {
            2.0 * j as f64 / (n_actions - 1) as f64 - 1.0
        }
    };
    let mirror_state = |i: usize| n - 1 - i;
    let mirror_action = |j: usize| n_actions - 1 - j;

    let row_for = |i: usize, j: usize| -> Vec<f64> {
        let theta = angle(i);
        let next = theta + 0.4 * (theta.sin() + torque(j));
        // Continuous grid index, wrapped onto the ring, split between its two neighbours.
        let x = (next / spacing + centre).rem_euclid(n as f64);
        let lower = x.floor();
        let frac = x - lower;
        let lo = lower as usize % n;
        let hi = (lo + 1) % n;
        let mut row = vec![0.0; n];
        row[lo] += 1.0 - frac;
        row[hi] += frac;
        row
    };

    let mut transitions = vec![0.0; n * n_actions * n];
    let mut rewards = vec![0.0; n * n_actions];
    for i in 0..n {
        for j in 0..n_actions {
            let (mi, mj) = (mirror_state(i), mirror_action(j));
            if (i, j) > (mi, mj) {
                continue;
            }
            let mut row = row_for(i, j);
            if (i, j) == (mi, mj) {
                // Self-mirrored pair: symmetrise the row so it equals its own image.
                let mirrored: Vec<f64> = (0..n).map(|k| row[mirror_state(k)]).collect();
                row = row.iter().zip(&mirrored).map(|(a, b)| 0.5 * (a + b)).collect();
            }
            let reward = (1.0 + angle(i).cos()) / 2.0;
            let start = (i * n_actions + j) * n;
            transitions[start..start + n].copy_from_slice(&row);
            let mstart = (mi * n_actions + mj) * n;
            for k in 0..n {
                transitions[mstart + mirror_state(k)] = row[k];
            }
            rewards[i * n_actions + j] = reward;
            rewards[mi * n_actions + mj] = reward;
        }
    }
    FiniteMdp::from_flat(n, n_actions, transitions, rewards, gamma).expect("ring MDP is well formed")
}
