//! Tabular MDPs and exact dynamic programming.
//!
//! Transitions are stored densely as `[state][action][next_state]` in a flat
//! row-major buffer. Solvers are Jacobi iterations with a sup-norm stopping
//! rule chosen so that the returned table is within `tol` of the true fixed
//! point (and therefore also has Bellman residual at most `tol`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MdpError, Result};

/// Row-sum tolerance for MDPs built in memory.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Row-sum tolerance applied when reading MDP files.
pub const LOAD_ROW_SUM_TOL: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
}

/// On-disk JSON layout.
#[derive(Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
}

impl FiniteMdp {
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        gamma: f64,
    ) -> Result<Self> {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        Self::from_nested(n_states, n_actions, transitions, rewards, gamma, ROW_SUM_TOL)
    }

    /// Builds an MDP from flat row-major buffers (`transitions[(s * A + a) * S + t]`,
    /// `rewards[s * A + a]`).
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if transitions.len() != n_states * n_actions * n_states {
            return Err(MdpError::DimensionMismatch(format!(
                "transition buffer has {} entries, expected {}",
                transitions.len(),
                n_states * n_actions * n_states
            )));
        }
        if rewards.len() != n_states * n_actions {
            return Err(MdpError::DimensionMismatch(format!(
                "reward buffer has {} entries, expected {}",
                rewards.len(),
                n_states * n_actions
            )));
        }
        let mdp = Self {
            n_states,
            n_actions,
            gamma,
            transitions,
            rewards,
        };
        mdp.validate(ROW_SUM_TOL)?;
        Ok(mdp)
    }

    fn from_nested(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<f64>>,
        gamma: f64,
        row_tol: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::SchemaError(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if transitions.len() != n_states {
            return Err(MdpError::SchemaError(format!(
                "transitions has {} state rows, expected {n_states}",
                transitions.len()
            )));
        }
        if rewards.len() != n_states {
            return Err(MdpError::SchemaError(format!(
                "rewards has {} rows, expected {n_states}",
                rewards.len()
            )));
        }
        let mut flat_t = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(MdpError::SchemaError(format!(
                    "transitions[{s}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(MdpError::SchemaError(format!(
                        "transitions[{s}][{a}] has {} entries, expected {n_states}",
                        row.len()
                    )));
                }
                flat_t.extend_from_slice(row);
            }
        }
        let mut flat_r = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rewards.iter().enumerate() {
            if row.len() != n_actions {
                return Err(MdpError::SchemaError(format!(
                    "rewards[{s}] has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            flat_r.extend_from_slice(row);
        }
        let mdp = Self {
            n_states,
            n_actions,
            gamma,
            transitions: flat_t,
            rewards: flat_r,
        };
        mdp.validate(row_tol)?;
        Ok(mdp)
    }

    fn validate(&self, row_tol: f64) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(MdpError::SchemaError(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.transition_row(s, a);
                if let Some(t) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
                    return Err(MdpError::NonStochasticMatrix {
                        state: s,
                        action: a,
                        reason: format!("entry {t} is {}", row[t]),
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > row_tol {
                    return Err(MdpError::NonStochasticMatrix {
                        state: s,
                        action: a,
                        reason: format!("row sums to {sum}"),
                    });
                }
                let r = self.reward(s, a);
                if !r.is_finite() {
                    return Err(MdpError::SchemaError(format!(
                        "reward ({s}, {a}) is not finite"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + next]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    /// Overwrites one reward entry. Used to build perturbed variants.
    pub fn set_reward(&mut self, s: usize, a: usize, r: f64) {
        assert!(r.is_finite(), "rewards must be finite");
        self.rewards[s * self.n_actions + a] = r;
    }

    /// Returns a copy with a different discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        out.gamma = gamma;
        out.validate(f64::INFINITY)?;
        Ok(out)
    }

    pub fn rewards_nested(&self) -> Vec<Vec<f64>> {
        self.rewards
            .chunks(self.n_actions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn transitions_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| self.transition_row(s, a).to_vec())
                    .collect()
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MdpFile =
            serde_json::from_str(text).map_err(|e| MdpError::SchemaError(e.to_string()))?;
        Self::from_nested(
            file.n_states,
            file.n_actions,
            file.transitions,
            file.rewards,
            file.gamma,
            LOAD_ROW_SUM_TOL,
        )
    }

    pub fn to_json_string(&self) -> String {
        let file = MdpFile {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            transitions: self.transitions_nested(),
            rewards: self.rewards_nested(),
        };
        serde_json::to_string_pretty(&file).expect("MDP serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// `Σ_t τ_a(t|s) v[t]`.
    #[inline]
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition_row(s, a)
            .iter()
            .zip(v)
            .map(|(p, x)| p * x)
            .sum()
    }
}

/// Stochastic policy over a finite action set; deterministic policies are one-hot rows.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(MdpError::DimensionMismatch(format!(
                    "policy row {s} has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            probs.extend_from_slice(row);
        }
        Self::from_flat(n_states, n_actions, probs)
    }

    pub fn from_flat(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(MdpError::DimensionMismatch(format!(
                "policy buffer has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        let policy = Self {
            n_states,
            n_actions,
            probs,
        };
        for s in 0..n_states {
            let row = policy.row(s);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(MdpError::NonStochasticPolicy {
                    state: s,
                    reason: "negative or non-finite entry".into(),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MdpError::NonStochasticPolicy {
                    state: s,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(policy)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(MdpError::DimensionMismatch(format!(
                    "action {a} for state {s} is out of range (n_actions = {n_actions})"
                )));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// The action with the largest probability in each state (lowest index on ties).
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| argmax(self.row(s))).collect()
    }

    fn check_dims(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(MdpError::DimensionMismatch(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states, self.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    /// Row-major `[state][action]`.
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub iterations: usize,
}

impl ValueTable {
    #[inline]
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

fn check_solver_args(mdp: &FiniteMdp, tol: f64) -> Result<()> {
    if mdp.gamma >= 1.0 {
        return Err(MdpError::NoConvergence(
            "gamma = 1 is not supported by the iterative solvers".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(MdpError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Sup-norm change below which the next iterate is within `tol / 2` of the fixed point,
/// leaving the other half of the budget for round-off.
fn stopping_threshold(gamma: f64, tol: f64) -> f64 {
    0.5 * tol * (1.0 - gamma) / gamma
}

pub fn policy_evaluation(mdp: &FiniteMdp, policy: &TabularPolicy, tol: f64) -> Result<ValueTable> {
    policy_evaluation_from(mdp, policy, tol, None)
}

/// Policy evaluation started from an arbitrary initial Q table.
pub fn policy_evaluation_from(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    tol: f64,
    init_q: Option<&[f64]>,
) -> Result<ValueTable> {
    check_solver_args(mdp, tol)?;
    policy.check_dims(mdp)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut q = match init_q {
        Some(init) if init.len() == ns * na => init.to_vec(),
        Some(init) => {
            return Err(MdpError::DimensionMismatch(format!(
                "initial Q has {} entries, expected {}",
                init.len(),
                ns * na
            )))
        }
        None => vec![0.0; ns * na],
    };
    let threshold = stopping_threshold(mdp.gamma, tol);
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns * na];
    for iteration in 1..=MAX_ITERATIONS {
        state_values(policy, &q, &mut v);
        let delta = backup(mdp, &v, &q, &mut next);
        std::mem::swap(&mut q, &mut next);
        if delta <= threshold {
            state_values(policy, &q, &mut v);
            return Ok(ValueTable {
                v,
                q,
                n_actions: na,
                iterations: iteration,
            });
        }
    }
    Err(MdpError::NoConvergence(format!(
        "policy evaluation exceeded {MAX_ITERATIONS} iterations"
    )))
}

/// Optimal values and the greedy policy (ties broken towards the lowest action index).
pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<(ValueTable, TabularPolicy)> {
    check_solver_args(mdp, tol)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let threshold = stopping_threshold(mdp.gamma, tol);
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    for iteration in 1..=MAX_ITERATIONS {
        max_values(na, &q, &mut v);
        let delta = backup(mdp, &v, &q, &mut next);
        std::mem::swap(&mut q, &mut next);
        if delta <= threshold {
            max_values(na, &q, &mut v);
            let greedy: Vec<usize> = q.chunks(na).map(argmax).collect();
            let policy = TabularPolicy::deterministic(&greedy, na)?;
            return Ok((
                ValueTable {
                    v,
                    q,
                    n_actions: na,
                    iterations: iteration,
                },
                policy,
            ));
        }
    }
    Err(MdpError::NoConvergence(format!(
        "value iteration exceeded {MAX_ITERATIONS} iterations"
    )))
}

fn state_values(policy: &TabularPolicy, q: &[f64], v: &mut [f64]) {
    let na = policy.n_actions;
    for (s, vs) in v.iter_mut().enumerate() {
        *vs = policy
            .row(s)
            .iter()
            .zip(&q[s * na..(s + 1) * na])
            .map(|(p, x)| p * x)
            .sum();
    }
}

fn max_values(na: usize, q: &[f64], v: &mut [f64]) {
    for (vs, row) in v.iter_mut().zip(q.chunks(na)) {
        *vs = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
}

/// One Jacobi backup `out = R + γ P v`; returns `‖out − q‖∞`.
fn backup(mdp: &FiniteMdp, v: &[f64], q: &[f64], out: &mut [f64]) -> f64 {
    let na = mdp.n_actions;
    let mut delta: f64 = 0.0;
    for s in 0..mdp.n_states {
        for a in 0..na {
            let i = s * na + a;
            out[i] = mdp.reward(s, a) + mdp.gamma * mdp.expected_next(s, a, v);
            delta = delta.max((out[i] - q[i]).abs());
        }
    }
    delta
}

/// `‖T^π q − q‖∞` for the policy-evaluation operator.
pub fn bellman_residual(mdp: &FiniteMdp, policy: &TabularPolicy, q: &[f64]) -> f64 {
    let mut v = vec![0.0; mdp.n_states];
    state_values(policy, q, &mut v);
    let mut out = vec![0.0; q.len()];
    backup(mdp, &v, q, &mut out)
}

/// `‖T* q − q‖∞` for the optimality operator.
pub fn optimality_residual(mdp: &FiniteMdp, q: &[f64]) -> f64 {
    let mut v = vec![0.0; mdp.n_states];
    max_values(mdp.n_actions, q, &mut v);
    let mut out = vec![0.0; q.len()];
    backup(mdp, &v, q, &mut out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_mdp;

    fn single_state(rewards: &[f64], gamma: f64) -> FiniteMdp {
        FiniteMdp::new(
            vec![vec![vec![1.0]; rewards.len()]],
            vec![rewards.to_vec()],
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn geometric_series_value() {
        let mdp = single_state(&[1.0], 0.99);
        let policy = TabularPolicy::uniform(1, 1);
        let tol = 1e-10;
        let values = policy_evaluation(&mdp, &policy, tol).unwrap();
        assert!((values.v[0] - 100.0).abs() <= tol, "{}", values.v[0]);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mut mdp = random_mdp(3, 4, 3, 0.9);
        for s in 0..4 {
            for a in 0..3 {
                mdp.set_reward(s, a, 0.0);
            }
        }
        let values = policy_evaluation(&mdp, &TabularPolicy::uniform(4, 3), 1e-10).unwrap();
        assert!(values.v.iter().chain(&values.q).all(|x| *x == 0.0));
    }

    #[test]
    fn two_state_chain() {
        // s0 --a0--> s1 with reward 1; s1 absorbing with reward 0.
        let mdp = FiniteMdp::new(
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0], vec![0.0]],
            0.5,
        )
        .unwrap();
        let policy = TabularPolicy::deterministic(&[0, 0], 1).unwrap();
        let values = policy_evaluation(&mdp, &policy, 1e-12).unwrap();
        assert!((values.v[0] - 1.0).abs() < 1e-12);
        assert!(values.v[1].abs() < 1e-12);
    }

    #[test]
    fn gamma_one_is_rejected() {
        let mdp = single_state(&[1.0], 1.0);
        assert!(matches!(
            policy_evaluation(&mdp, &TabularPolicy::uniform(1, 1), 1e-10),
            Err(MdpError::NoConvergence(_))
        ));
        assert!(matches!(
            value_iteration(&mdp, 1e-10),
            Err(MdpError::NoConvergence(_))
        ));
    }

    #[test]
    fn non_stochastic_rows_are_rejected() {
        let err = FiniteMdp::new(vec![vec![vec![0.5, 0.4], vec![1.0, 0.0]]; 2], vec![vec![0.0; 2]; 2], 0.9)
            .unwrap_err();
        assert!(matches!(
            err,
            MdpError::NonStochasticMatrix { state: 0, action: 0, .. }
        ));
    }

    #[test]
    fn value_iteration_single_state_two_actions() {
        let mdp = single_state(&[0.0, 1.0], 0.9);
        let (values, policy) = value_iteration(&mdp, 1e-10).unwrap();
        assert!((values.v[0] - 10.0).abs() <= 1e-10);
        assert_eq!(policy.greedy_actions(), vec![1]);
    }

    #[test]
    fn all_zero_rewards_pick_action_zero() {
        let mut mdp = random_mdp(11, 3, 4, 0.9);
        for s in 0..3 {
            for a in 0..4 {
                mdp.set_reward(s, a, 0.0);
            }
        }
        let (values, policy) = value_iteration(&mdp, 1e-10).unwrap();
        assert!(values.v.iter().all(|x| *x == 0.0));
        assert_eq!(policy.greedy_actions(), vec![0, 0, 0]);
    }

    #[test]
    fn value_iteration_matches_long_backup_oracle() {
        let mdp = random_mdp(7, 5, 3, 0.9);
        // Oracle: 10,000 plain Bellman-optimality backups.
        let (ns, na) = (5, 3);
        let mut q = vec![0.0; ns * na];
        for _ in 0..10_000 {
            let v: Vec<f64> = q
                .chunks(na)
                .map(|r: &[f64]| r.iter().copied().fold(f64::MIN, f64::max))
                .collect();
            let mut next = vec![0.0; ns * na];
            for s in 0..ns {
                for a in 0..na {
                    let mut ev = 0.0;
                    for t in 0..ns {
                        ev += mdp.transition(s, a, t) * v[t];
                    }
                    next[s * na + a] = mdp.reward(s, a) + 0.9 * ev;
                }
            }
            q = next;
        }
        let (values, _) = value_iteration(&mdp, 1e-10).unwrap();
        for (x, y) in values.q.iter().zip(&q) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
        assert!(optimality_residual(&mdp, &values.q) <= 1e-10);
    }

    #[test]
    fn evaluation_residual_within_tolerance() {
        let mdp = random_mdp(5, 6, 2, 0.95);
        let policy = TabularPolicy::uniform(6, 2);
        let values = policy_evaluation(&mdp, &policy, 1e-9).unwrap();
        assert!(bellman_residual(&mdp, &policy, &values.q) <= 1e-9);
        for s in 0..6 {
            let mixed: f64 = (0..2).map(|a| policy.prob(s, a) * values.q(s, a)).sum();
            assert!((mixed - values.v[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mdp = random_mdp(21, 4, 3, 0.97);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mdp.json");
        mdp.save(&path).unwrap();
        let loaded = FiniteMdp::load(&path).unwrap();
        assert_eq!(loaded, mdp);
        for (x, y) in loaded.transitions.iter().zip(&mdp.transitions) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let bad_row = r#"{"n_states": 1, "n_actions": 1, "gamma": 0.9,
            "transitions": [[[0.9]]], "rewards": [[0.0]]}"#;
        assert!(matches!(
            FiniteMdp::from_json_str(bad_row),
            Err(MdpError::NonStochasticMatrix { .. })
        ));
        let bad_gamma = r#"{"n_states": 1, "n_actions": 1, "gamma": 1.5,
            "transitions": [[[1.0]]], "rewards": [[0.0]]}"#;
        assert!(matches!(
            FiniteMdp::from_json_str(bad_gamma),
            Err(MdpError::SchemaError(_))
        ));
        let missing = r#"{"n_states": 1, "n_actions": 1,
            "transitions": [[[1.0]]], "rewards": [[0.0]]}"#;
        assert!(matches!(
            FiniteMdp::from_json_str(missing),
            Err(MdpError::SchemaError(_))
        ));
        let slightly_off = r#"{"n_states": 1, "n_actions": 1, "gamma": 0.9,
            "transitions": [[[1.0000000001]]], "rewards": [[0.0]]}"#;
        assert!(FiniteMdp::from_json_str(slightly_off).is_ok());
    }
}
