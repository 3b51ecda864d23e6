//! Finite MDP homomorphisms.
//!
//! A homomorphism `h = (f, g_s)` sends every state `s` to an abstract state `f(s)` and
//! every action `a` available in `s` to an abstract action `g_s(a)`. It is exact when
//! rewards are invariant and block-aggregated transitions are equivariant:
//!
//! ```text
//! R̄(f(s), g_s(a)) = R(s, a)
//! τ̄_{g_s(a)}(B | f(s)) = Σ_{s'' ∈ f⁻¹(B)} τ_a(s'' | s)
//! ```
//!
//! Block masses are always summed in sorted order so that states whose transition rows
//! are permutations of one another produce bit-identical masses.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MdpError, Result};
use crate::mdp::{self, FiniteMdp, TabularPolicy};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteHomomorphism {
    state_map: Vec<usize>,
    action_maps: Vec<Vec<usize>>,
    n_abstract_states: usize,
    n_abstract_actions: usize,
}

#[derive(Serialize, Deserialize)]
struct HomFile {
    state_map: Vec<usize>,
    action_maps: Vec<Vec<usize>>,
}

impl FiniteHomomorphism {
    /// Validates surjectivity of `f` and of every `g_s`; abstract sizes are inferred.
    pub fn new(state_map: Vec<usize>, action_maps: Vec<Vec<usize>>) -> Result<Self> {
        if state_map.is_empty() {
            return Err(MdpError::SchemaError("state_map is empty".into()));
        }
        if action_maps.len() != state_map.len() {
            return Err(MdpError::DimensionMismatch(format!(
                "{} action maps for {} states",
                action_maps.len(),
                state_map.len()
            )));
        }
        let n_actions = action_maps[0].len();
        if n_actions == 0 || action_maps.iter().any(|row| row.len() != n_actions) {
            return Err(MdpError::DimensionMismatch(
                "action maps must all have the same non-zero length".into(),
            ));
        }
        let n_abstract_states = state_map.iter().max().map_or(0, |m| m + 1);
        let n_abstract_actions = action_maps
            .iter()
            .flat_map(|row| row.iter())
            .max()
            .map_or(0, |m| m + 1);
        if !covers(&state_map, n_abstract_states) {
            return Err(MdpError::SchemaError(
                "state_map is not surjective onto 0..n_abstract_states".into(),
            ));
        }
        for (s, row) in action_maps.iter().enumerate() {
            if !covers(row, n_abstract_actions) {
                return Err(MdpError::SchemaError(format!(
                    "action map of state {s} is not surjective onto 0..{n_abstract_actions}"
                )));
            }
        }
        Ok(Self {
            state_map,
            action_maps,
            n_abstract_states,
            n_abstract_actions,
        })
    }

    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        Self {
            state_map: (0..n_states).collect(),
            action_maps: vec![(0..n_actions).collect(); n_states],
            n_abstract_states: n_states,
            n_abstract_actions: n_actions,
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_map.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_maps[0].len()
    }

    pub fn n_abstract_states(&self) -> usize {
        self.n_abstract_states
    }

    pub fn n_abstract_actions(&self) -> usize {
        self.n_abstract_actions
    }

    pub fn state_map(&self) -> &[usize] {
        &self.state_map
    }

    pub fn action_maps(&self) -> &[Vec<usize>] {
        &self.action_maps
    }

    #[inline]
    pub fn state(&self, s: usize) -> usize {
        self.state_map[s]
    }

    #[inline]
    pub fn action(&self, s: usize, a: usize) -> usize {
        self.action_maps[s][a]
    }

    /// `|g_s⁻¹(ā)|`.
    pub fn preimage_size(&self, s: usize, abstract_action: usize) -> usize {
        self.action_maps[s]
            .iter()
            .filter(|&&x| x == abstract_action)
            .count()
    }

    fn check_dims(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(MdpError::DimensionMismatch(format!(
                "homomorphism is over {}x{}, MDP is {}x{}",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: HomFile =
            serde_json::from_str(text).map_err(|e| MdpError::SchemaError(e.to_string()))?;
        Self::new(file.state_map, file.action_maps)
    }

    pub fn to_json_string(&self) -> String {
        let file = HomFile {
            state_map: self.state_map.clone(),
            action_maps: self.action_maps.clone(),
        };
        serde_json::to_string_pretty(&file).expect("homomorphism serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

fn covers(values: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    for &v in values {
        seen[v] = true;
    }
    seen.into_iter().all(|x| x)
}

/// Worst-case violations of reward invariance and transition equivariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomomorphismReport {
    pub reward_invariance_error: f64,
    pub transition_equivariance_error: f64,
    pub tolerance: f64,
    pub is_exact: bool,
}

/// Sum of `values` in ascending order; identical multisets give identical results.
pub fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Mass that `τ_a(·|s)` puts on each block of `block_of`.
pub fn block_masses(mdp: &FiniteMdp, s: usize, a: usize, block_of: &[usize], n_blocks: usize) -> Vec<f64> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_blocks];
    for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
        if p != 0.0 {
            buckets[block_of[t]].push(p);
        }
    }
    buckets.iter_mut().map(|b| canonical_sum(b)).collect()
}

/// Builds the quotient MDP, taking abstract rewards and transitions from the lowest-index
/// preimage of each abstract state and action. Disagreement between preimages beyond `tol`
/// is reported through [`MdpError::InconsistentQuotient`], which still carries the quotient.
pub fn quotient_mdp(
    mdp: &FiniteMdp,
    h: &FiniteHomomorphism,
    tol: f64,
) -> Result<(FiniteMdp, HomomorphismReport)> {
    h.check_dims(mdp)?;
    let nb = h.n_abstract_states;
    let nab = h.n_abstract_actions;

    let mut rep_state = vec![usize::MAX; nb];
    for (s, &b) in h.state_map.iter().enumerate() {
        if rep_state[b] == usize::MAX {
            rep_state[b] = s;
        }
    }

    let mut rewards = vec![0.0; nb * nab];
    let mut transitions = vec![0.0; nb * nab * nb];
    for (b, &s) in rep_state.iter().enumerate() {
        for abar in 0..nab {
            let a = h.action_maps[s]
                .iter()
                .position(|&x| x == abar)
                .expect("action maps are surjective");
            rewards[b * nab + abar] = mdp.reward(s, a);
            let masses = block_masses(mdp, s, a, &h.state_map, nb);
            let start = (b * nab + abar) * nb;
            transitions[start..start + nb].copy_from_slice(&masses);
        }
    }
    let quotient = FiniteMdp::from_flat(nb, nab, transitions, rewards, mdp.gamma())?;

    let mut reward_err: f64 = 0.0;
    let mut trans_err: f64 = 0.0;
    for s in 0..mdp.n_states() {
        let b = h.state(s);
        for a in 0..mdp.n_actions() {
            let abar = h.action(s, a);
            reward_err = reward_err.max((quotient.reward(b, abar) - mdp.reward(s, a)).abs());
            let masses = block_masses(mdp, s, a, &h.state_map, nb);
            for (m, q) in masses.iter().zip(quotient.transition_row(b, abar)) {
                trans_err = trans_err.max((m - q).abs());
            }
        }
    }
    let report = HomomorphismReport {
        reward_invariance_error: reward_err,
        transition_equivariance_error: trans_err,
        tolerance: tol,
        is_exact: reward_err <= tol && trans_err <= tol,
    };
    if report.is_exact {
        Ok((quotient, report))
    } else {
        Err(MdpError::InconsistentQuotient {
            quotient: Box::new(quotient),
            report,
        })
    }
}

/// Lifts an abstract policy by splitting each abstract action's probability uniformly over
/// its preimage: `π↑(a|s) = π̄(g_s(a)|f(s)) / |g_s⁻¹(g_s(a))|`.
pub fn lift_policy(abstract_policy: &TabularPolicy, h: &FiniteHomomorphism) -> Result<TabularPolicy> {
    if abstract_policy.n_states() != h.n_abstract_states
        || abstract_policy.n_actions() != h.n_abstract_actions
    {
        return Err(MdpError::DimensionMismatch(format!(
            "abstract policy is {}x{}, homomorphism image is {}x{}",
            abstract_policy.n_states(),
            abstract_policy.n_actions(),
            h.n_abstract_states,
            h.n_abstract_actions
        )));
    }
    let ns = h.n_states();
    let na = h.n_actions();
    let mut probs = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let mut counts = vec![0usize; h.n_abstract_actions];
        for &abar in &h.action_maps[s] {
            counts[abar] += 1;
        }
        for &abar in &h.action_maps[s] {
            probs.push(abstract_policy.prob(h.state(s), abar) / counts[abar] as f64);
        }
    }
    TabularPolicy::from_flat(ns, na, probs)
}

/// `max_{s,a} |Q^{π↑}(s,a) − Q^{π̄}(f(s), g_s(a))|`, with both sides from policy evaluation at `tol`.
pub fn verify_value_equivalence(
    mdp: &FiniteMdp,
    h: &FiniteHomomorphism,
    abstract_policy: &TabularPolicy,
    tol: f64,
) -> Result<f64> {
    let (quotient, _) = quotient_mdp(mdp, h, tol)?;
    let lifted = lift_policy(abstract_policy, h)?;
    let actual = mdp::policy_evaluation(mdp, &lifted, tol)?;
    let abstract_values = mdp::policy_evaluation(&quotient, abstract_policy, tol)?;
    Ok(max_q_gap(mdp, h, &actual.q, &abstract_values.q))
}

/// `max_{s,a} |Q*(s,a) − Q̄*(f(s), g_s(a))|` from value iteration on both MDPs.
pub fn verify_optimal_value_equivalence(mdp: &FiniteMdp, h: &FiniteHomomorphism, tol: f64) -> Result<f64> {
    let (quotient, _) = quotient_mdp(mdp, h, tol)?;
    let (actual, _) = mdp::value_iteration(mdp, tol)?;
    let (abstract_values, _) = mdp::value_iteration(&quotient, tol)?;
    Ok(max_q_gap(mdp, h, &actual.q, &abstract_values.q))
}

fn max_q_gap(mdp: &FiniteMdp, h: &FiniteHomomorphism, q: &[f64], qbar: &[f64]) -> f64 {
    let na = mdp.n_actions();
    let nab = h.n_abstract_actions;
    let mut gap: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..na {
            let abstract_q = qbar[h.state(s) * nab + h.action(s, a)];
            gap = gap.max((q[s * na + a] - abstract_q).abs());
        }
    }
    gap
}

/// Per-state-action signature under a state partition: reward and block masses.
struct Signature {
    reward: f64,
    masses: Vec<f64>,
}

impl Signature {
    fn matches(&self, other: &Signature, tol: f64) -> bool {
        (self.reward - other.reward).abs() <= tol
            && self
                .masses
                .iter()
                .zip(&other.masses)
                .all(|(x, y)| (x - y).abs() <= tol)
    }
}

fn signatures(mdp: &FiniteMdp, block_of: &[usize], n_blocks: usize) -> Vec<Vec<Signature>> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| Signature {
                    reward: mdp.reward(s, a),
                    masses: block_masses(mdp, s, a, block_of, n_blocks),
                })
                .collect()
        })
        .collect()
}

/// Mutual simulation: every action of one state is matched by some action of the other.
fn lax_similar(x: &[Signature], y: &[Signature], tol: f64) -> bool {
    x.iter().all(|sx| y.iter().any(|sy| sx.matches(sy, tol)))
        && y.iter().all(|sy| x.iter().any(|sx| sy.matches(sx, tol)))
}

/// Relabels blocks in order of their lowest member.
fn canonical_blocks(block_of: &[usize]) -> (Vec<usize>, usize) {
    let mut relabel = vec![usize::MAX; block_of.len() + 1];
    let mut next = 0;
    let mut out = Vec::with_capacity(block_of.len());
    for &b in block_of {
        if relabel[b] == usize::MAX {
            relabel[b] = next;
            next += 1;
        }
        out.push(relabel[b]);
    }
    (out, next)
}

/// Splits blocks until every block's members are lax-similar to the block's first member.
fn refine(mdp: &FiniteMdp, mut block_of: Vec<usize>, tol: f64) -> (Vec<usize>, usize) {
    let (b, mut n_blocks) = canonical_blocks(&block_of);
    block_of = b;
    loop {
        let sigs = signatures(mdp, &block_of, n_blocks);
        let mut new_block = vec![usize::MAX; block_of.len()];
        let mut reps: Vec<usize> = Vec::new();
        for s in 0..block_of.len() {
            let found = reps.iter().position(|&r| {
                block_of[r] == block_of[s] && lax_similar(&sigs[s], &sigs[r], tol)
            });
            new_block[s] = match found {
                Some(k) => k,
                None => {
                    reps.push(s);
                    reps.len() - 1
                }
            };
        }
        let (canon, count) = canonical_blocks(&new_block);
        block_of = canon;
        if count == n_blocks {
            return (block_of, n_blocks);
        }
        n_blocks = count;
    }
}

enum ActionMapOutcome {
    Done(FiniteHomomorphism),
    /// States that must leave their block before a consistent labelling exists.
    Split(Vec<Vec<usize>>),
}

/// Abstract action labels for every block, following the representative's action order.
///
/// Within a block each action is assigned to the first action class of the representative
/// it matches. Blocks with fewer classes than the largest block pad their label set by
/// duplicating classes that every member can supply more than once.
fn build_action_maps(
    mdp: &FiniteMdp,
    block_of: &[usize],
    n_blocks: usize,
    tol: f64,
) -> ActionMapOutcome {
    let na = mdp.n_actions();
    let sigs = signatures(mdp, block_of, n_blocks);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    for (s, &b) in block_of.iter().enumerate() {
        members[b].push(s);
    }

    // class_of[s][a]: index of the representative's action class matched by (s, a).
    let mut class_of: Vec<Vec<usize>> = vec![Vec::new(); mdp.n_states()];
    let mut n_classes = vec![0usize; n_blocks];
    let mut class_heads: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    let mut splits = Vec::new();
    for (b, block) in members.iter().enumerate() {
        let r = block[0];
        let heads = &mut class_heads[b];
        for a in 0..na {
            if !heads.iter().any(|&c| sigs[r][a].matches(&sigs[r][c], tol)) {
                heads.push(a);
            }
        }
        n_classes[b] = heads.len();
        let mut misfits = Vec::new();
        for &s in block {
            let row: Option<Vec<usize>> = (0..na)
                .map(|a| heads.iter().position(|&c| sigs[s][a].matches(&sigs[r][c], tol)))
                .collect();
            match row {
                Some(row) if (0..heads.len()).all(|k| row.contains(&k)) => class_of[s] = row,
                _ => misfits.push(s),
            }
        }
        if !misfits.is_empty() {
            splits.push(misfits);
        }
    }
    if !splits.is_empty() {
        return ActionMapOutcome::Split(splits);
    }

    let n_labels = n_classes.iter().copied().max().unwrap_or(0);
    let mut action_maps = vec![Vec::new(); mdp.n_states()];
    for (b, block) in members.iter().enumerate() {
        let k = n_classes[b];
        let multiplicity = |s: usize, c: usize| class_of[s].iter().filter(|&&x| x == c).count();
        let min_mult: Vec<usize> = (0..k)
            .map(|c| block.iter().map(|&s| multiplicity(s, c)).min().unwrap_or(0))
            .collect();
        let mut per_class = vec![1usize; k];
        let mut total = k;
        while total < n_labels {
            let Some(c) = (0..k).find(|&c| per_class[c] < min_mult[c]) else {
                // Members disagree on class multiplicities; separate them by profile.
                let profile = |s: usize| (0..k).map(|c| multiplicity(s, c)).collect::<Vec<_>>();
                let first = profile(block[0]);
                let misfits: Vec<usize> = block.iter().copied().filter(|&s| profile(s) != first).collect();
                return ActionMapOutcome::Split(vec![misfits]);
            };
            per_class[c] += 1;
            total += 1;
        }

        // Labels follow the representative's action order.
        let r = block[0];
        let mut class_labels: Vec<Vec<usize>> = vec![Vec::new(); k];
        let mut next_label = 0;
        for a in 0..na {
            let c = class_of[r][a];
            if class_labels[c].len() < per_class[c] {
                class_labels[c].push(next_label);
                next_label += 1;
            }
        }
        for &s in block {
            let mut seen = vec![0usize; k];
            action_maps[s] = (0..na)
                .map(|a| {
                    let c = class_of[s][a];
                    let labels = &class_labels[c];
                    let label = labels[seen[c].min(labels.len() - 1)];
                    seen[c] += 1;
                    label
                })
                .collect();
        }
    }
    let h = FiniteHomomorphism::new(block_of.to_vec(), action_maps)
        .expect("labelling covers every abstract action");
    ActionMapOutcome::Done(h)
}

fn split_off(block_of: &mut Vec<usize>, groups: &[Vec<usize>]) {
    let mut next = block_of.iter().copied().max().map_or(0, |m| m + 1);
    for group in groups {
        for &s in group {
            block_of[s] = next;
        }
        next += 1;
    }
}

/// Coarsest lax-bisimulation partition found by refinement, with its induced homomorphism
/// and quotient.
///
/// States `s`, `t` share a block when every action of one is matched by an action of the
/// other with rewards and block-aggregated transitions within `tol`. Abstract states are
/// numbered by lowest member; abstract actions follow the representative's action order.
pub fn minimize_lax(mdp: &FiniteMdp, tol: f64) -> Result<(FiniteHomomorphism, FiniteMdp)> {
    if !(tol >= 0.0) {
        return Err(MdpError::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    let mut block_of = vec![0usize; mdp.n_states()];
    loop {
        let (refined, n_blocks) = refine(mdp, block_of, tol);
        block_of = refined;
        let h = match build_action_maps(mdp, &block_of, n_blocks, tol) {
            ActionMapOutcome::Done(h) => h,
            ActionMapOutcome::Split(groups) => {
                split_off(&mut block_of, &groups);
                continue;
            }
        };
        match quotient_mdp(mdp, &h, tol) {
            Ok((quotient, _)) => return Ok((h, quotient)),
            Err(MdpError::InconsistentQuotient { quotient, .. }) => {
                // Greedy matching at tol > 0 is not transitive; isolate offending states.
                let offenders = inconsistent_states(mdp, &h, &quotient, tol);
                let groups: Vec<Vec<usize>> = offenders.into_iter().map(|s| vec![s]).collect();
                split_off(&mut block_of, &groups);
            }
            Err(e) => return Err(e),
        }
    }
}

fn inconsistent_states(mdp: &FiniteMdp, h: &FiniteHomomorphism, quotient: &FiniteMdp, tol: f64) -> Vec<usize> {
    (0..mdp.n_states())
        .filter(|&s| {
            let b = h.state(s);
            (0..mdp.n_actions()).any(|a| {
                let abar = h.action(s, a);
                let masses = block_masses(mdp, s, a, h.state_map(), h.n_abstract_states());
                (quotient.reward(b, abar) - mdp.reward(s, a)).abs() > tol
                    || masses
                        .iter()
                        .zip(quotient.transition_row(b, abar))
                        .any(|(m, q)| (m - q).abs() > tol)
            })
        })
        .collect()
}

/// Equivalence classes of state-action pairs with identical reward and identical block
/// masses under `state_map`. Returns a class id per `(s, a)` (row-major), numbered by
/// first occurrence.
pub fn pair_classes(mdp: &FiniteMdp, state_map: &[usize]) -> Vec<usize> {
    let n_blocks = state_map.iter().max().map_or(0, |m| m + 1);
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut out = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let mut key = vec![mdp.reward(s, a).to_bits()];
            key.extend(
                block_masses(mdp, s, a, state_map, n_blocks)
                    .iter()
                    .map(|m| (m + 0.0).to_bits()),
            );
            let id = match keys.iter().position(|k| *k == key) {
                Some(id) => id,
                None => {
                    keys.push(key);
                    keys.len() - 1
                }
            };
            out.push(id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{mirrored_mdp, random_mdp, random_policy};

    fn symmetric_two_state(perturb: f64) -> FiniteMdp {
        // Each state stays with prob 0.3 and moves to the other with 0.7; rewards mirror.
        let mut mdp = FiniteMdp::new(
            vec![
                vec![vec![0.3, 0.7], vec![0.6, 0.4]],
                vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            ],
            vec![vec![1.0, -0.5], vec![1.0, -0.5]],
            0.9,
        )
        .unwrap();
        mdp.set_reward(1, 0, 1.0 + perturb);
        mdp
    }

    #[test]
    fn identity_quotient_reproduces_mdp() {
        let mdp = random_mdp(1, 5, 3, 0.9);
        let (q, report) = quotient_mdp(&mdp, &FiniteHomomorphism::identity(5, 3), 0.0).unwrap();
        assert_eq!(q, mdp);
        assert_eq!(report.reward_invariance_error, 0.0);
        assert_eq!(report.transition_equivariance_error, 0.0);
    }

    #[test]
    fn symmetric_pair_collapses_to_one_state() {
        let mdp = symmetric_two_state(0.0);
        let h = FiniteHomomorphism::new(vec![0, 0], vec![vec![0, 1], vec![0, 1]]).unwrap();
        let (q, report) = quotient_mdp(&mdp, &h, 1e-12).unwrap();
        assert_eq!(q.n_states(), 1);
        assert!(report.is_exact);
        // Block masses: both states send all mass into the single block.
        assert_eq!(q.transition(0, 0, 0), 1.0);
        assert_eq!(q.reward(0, 1), -0.5);
    }

    #[test]
    fn perturbed_reward_is_reported() {
        let mdp = symmetric_two_state(0.1);
        let h = FiniteHomomorphism::new(vec![0, 0], vec![vec![0, 1], vec![0, 1]]).unwrap();
        match quotient_mdp(&mdp, &h, 1e-9) {
            Err(MdpError::InconsistentQuotient { report, .. }) => {
                assert!((report.reward_invariance_error - 0.1).abs() < 1e-12);
                assert_eq!(report.transition_equivariance_error, 0.0);
                assert!(!report.is_exact);
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn non_surjective_maps_are_rejected() {
        assert!(FiniteHomomorphism::new(vec![0, 2], vec![vec![0], vec![0]]).is_err());
        assert!(FiniteHomomorphism::new(vec![0, 0], vec![vec![0, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn lifting_splits_uniformly() {
        let h = FiniteHomomorphism::new(vec![0], vec![vec![0, 0, 1]]).unwrap();
        let abstract_policy = TabularPolicy::new(vec![vec![0.6, 0.4]]).unwrap();
        let lifted = lift_policy(&abstract_policy, &h).unwrap();
        assert_eq!(lifted.row(0), &[0.3, 0.3, 0.4]);
    }

    #[test]
    fn identity_lift_is_identity() {
        let policy = random_policy(3, 4, 3);
        let lifted = lift_policy(&policy, &FiniteHomomorphism::identity(4, 3)).unwrap();
        assert_eq!(lifted, policy);
    }

    #[test]
    fn deterministic_lift_inverts_bijective_maps() {
        let base = random_mdp(2, 3, 3, 0.9);
        let (_, h) = mirrored_mdp(&base, 5, true);
        let abstract_policy = TabularPolicy::deterministic(&[2, 0, 1], 3).unwrap();
        let lifted = lift_policy(&abstract_policy, &h).unwrap();
        for s in 0..6 {
            let chosen = lifted.greedy_actions()[s];
            assert_eq!(lifted.prob(s, chosen), 1.0);
            assert_eq!(h.action(s, chosen), abstract_policy.greedy_actions()[h.state(s)]);
        }
    }

    #[test]
    fn value_equivalence_on_mirrored_mdp() {
        let base = random_mdp(4, 2, 2, 0.9);
        let (mdp, h) = mirrored_mdp(&base, 9, true);
        let uniform = TabularPolicy::uniform(2, 2);
        assert!(verify_value_equivalence(&mdp, &h, &uniform, 1e-10).unwrap() <= 1e-8);
        assert!(verify_optimal_value_equivalence(&mdp, &h, 1e-10).unwrap() <= 1e-8);
        let id = FiniteHomomorphism::identity(4, 2);
        let policy = random_policy(1, 4, 2);
        assert!(verify_value_equivalence(&mdp, &id, &policy, 1e-10).unwrap() <= 2e-10);
    }

    #[test]
    fn minimize_generic_mdp_is_identity() {
        let mdp = random_mdp(8, 5, 3, 0.9);
        let (h, q) = minimize_lax(&mdp, 0.0).unwrap();
        assert_eq!(h, FiniteHomomorphism::identity(5, 3));
        assert_eq!(q, mdp);
    }

    #[test]
    fn minimize_disjoint_mirror_finds_two_states() {
        let base = random_mdp(6, 2, 2, 0.9);
        let (mdp, expected) = mirrored_mdp(&base, 0, false);
        let (h, q) = minimize_lax(&mdp, 0.0).unwrap();
        assert_eq!(h.n_abstract_states(), 2);
        assert_eq!(h, expected);
        assert_eq!(q.n_states(), 2);
    }

    #[test]
    fn duplicated_actions_are_padded() {
        // One state whose two actions are indistinguishable, next to one where they differ.
        let mdp = FiniteMdp::new(
            vec![
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ],
            vec![vec![0.0, 0.0], vec![1.0, 2.0]],
            0.9,
        )
        .unwrap();
        let (h, q) = minimize_lax(&mdp, 0.0).unwrap();
        assert_eq!(h.n_abstract_states(), 2);
        assert_eq!(h.n_abstract_actions(), 2);
        assert_eq!(q.reward(0, 0), q.reward(0, 1));
        assert!(quotient_mdp(&mdp, &h, 0.0).is_ok());
    }

    #[test]
    fn minimize_is_idempotent_on_mirrors() {
        let base = random_mdp(12, 3, 3, 0.9);
        let (mdp, _) = mirrored_mdp(&base, 2, true);
        let (h, q) = minimize_lax(&mdp, 0.0).unwrap();
        assert_eq!(h.n_abstract_states(), 3);
        let (h2, _) = minimize_lax(&q, 0.0).unwrap();
        assert_eq!(h2.n_abstract_states(), q.n_states());
    }

    #[test]
    fn json_round_trip() {
        let base = random_mdp(2, 3, 2, 0.9);
        let (_, h) = mirrored_mdp(&base, 1, true);
        assert_eq!(FiniteHomomorphism::from_json_str(&h.to_json_string()).unwrap(), h);
    }
}
