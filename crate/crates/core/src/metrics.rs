//! Bisimulation and lax bisimulation metrics.
//!
//! Both are fixed points of a `c_t`-contraction started from the zero metric:
//!
//! ```text
//! d(s, s')            = max_a c_r |R(s,a) − R(s',a)| + c_t W_d(τ_a(·|s), τ_a(·|s'))
//! d((s,a), (s',a'))   = c_r |R(s,a) − R(s',a')| + c_t W_{d_S}(τ_a(·|s), τ_{a'}(·|s'))
//! ```
//!
//! where `d_S` is the symmetric Hausdorff distance between the action sets of two states.
//! Atoms at distance exactly zero are merged before transport, so pairs whose aggregated
//! distributions agree bit-for-bit get an exact zero rather than round-off.

use crate::error::{MdpError, Result};
use crate::homomorphism::canonical_sum;
use crate::mdp::{FiniteMdp, MAX_ITERATIONS};
use crate::transport::solve_transport;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricTable {
    /// Row-major `size × size` distances.
    pub d: Vec<f64>,
    pub size: usize,
    pub c_r: f64,
    pub c_t: f64,
    pub iterations_run: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

impl MetricTable {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.size + j]
    }

    /// Equivalence classes of the kernel `{d = 0}`, numbered by lowest member.
    pub fn zero_classes(&self) -> Vec<usize> {
        zero_classes(&self.d, self.size)
    }
}

/// Default weights: `c_r = 1`, `c_t = γ`.
pub fn default_weights(mdp: &FiniteMdp) -> (f64, f64) {
    (1.0, mdp.gamma())
}

fn check_weights(c_r: f64, c_t: f64, tol: f64) -> Result<()> {
    if !(c_r.is_finite() && c_r >= 0.0) {
        return Err(MdpError::InvalidArgument(format!("c_r must be finite and >= 0, got {c_r}")));
    }
    if !(c_t >= 0.0) {
        return Err(MdpError::InvalidArgument(format!("c_t must be >= 0, got {c_t}")));
    }
    if c_t >= 1.0 {
        return Err(MdpError::NoConvergence(format!("c_t = {c_t} is not a contraction factor")));
    }
    if !(tol > 0.0) {
        return Err(MdpError::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    Ok(())
}

/// Union of atoms at distance exactly zero; labels are canonical (lowest member first).
fn zero_classes(d: &[f64], n: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if d[i * n + j] == 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = next;
                next += 1;
            }
            label[root]
        })
        .collect()
}

/// Ground metric collapsed onto zero-distance classes.
struct Ground {
    class_of: Vec<usize>,
    n_classes: usize,
    /// Distances between class representatives.
    cost: Vec<f64>,
}

impl Ground {
    fn new(d: &[f64], n: usize) -> Self {
        let class_of = zero_classes(d, n);
        let n_classes = class_of.iter().max().map_or(0, |m| m + 1);
        let mut rep = vec![usize::MAX; n_classes];
        for (s, &c) in class_of.iter().enumerate() {
            if rep[c] == usize::MAX {
                rep[c] = s;
            }
        }
        let mut cost = vec![0.0; n_classes * n_classes];
        for a in 0..n_classes {
            for b in 0..n_classes {
                cost[a * n_classes + b] = d[rep[a] * n + rep[b]];
            }
        }
        Self { class_of, n_classes, cost }
    }

    /// Class masses of every transition row, summed canonically.
    fn aggregate(&self, mdp: &FiniteMdp) -> Vec<Vec<f64>> {
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); self.n_classes];
        let mut out = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                for b in buckets.iter_mut() {
                    b.clear();
                }
                for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
                    if p != 0.0 {
                        buckets[self.class_of[t]].push(p);
                    }
                }
                out.push(buckets.iter_mut().map(|b| canonical_sum(b)).collect());
            }
        }
        out
    }

    fn distance(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        let n = self.n_classes;
        Ok(solve_transport(p, q, |i, j| self.cost[i * n + j])?.cost)
    }
}

/// Iterates `update` from the zero table until the error bound `residual · max(1, c_t/(1−c_t))`
/// is within `tol` and the zero pattern has stopped changing.
fn fixed_point(
    size: usize,
    c_r: f64,
    c_t: f64,
    tol: f64,
    mut update: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<MetricTable> {
    let bound_factor = (c_t / (1.0 - c_t)).max(1.0);
    let mut d = vec![0.0; size * size];
    let mut history = Vec::new();
    for iteration in 1..=MAX_ITERATIONS {
        let next = update(&d)?;
        let residual = d
            .iter()
            .zip(&next)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        let zeros_stable = d.iter().zip(&next).all(|(a, b)| (*a == 0.0) == (*b == 0.0));
        history.push(residual);
        d = next;
        if residual * bound_factor <= tol && zeros_stable {
            return Ok(MetricTable {
                d,
                size,
                c_r,
                c_t,
                iterations_run: iteration,
                residual,
                residual_history: history,
            });
        }
    }
    Err(MdpError::NoConvergence(format!("metric did not converge in {MAX_ITERATIONS} sweeps")))
}

/// Bisimulation metric over states, with actions matched by label.
pub fn bisim_metric(mdp: &FiniteMdp, c_r: f64, c_t: f64, tol: f64) -> Result<MetricTable> {
    check_weights(c_r, c_t, tol)?;
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    fixed_point(ns, c_r, c_t, tol, |d| {
        let ground = Ground::new(d, ns);
        let agg = ground.aggregate(mdp);
        let mut next = vec![0.0; ns * ns];
        for i in 0..ns {
            for j in i + 1..ns {
                let mut worst: f64 = 0.0;
                for a in 0..na {
                    let reward_gap = (mdp.reward(i, a) - mdp.reward(j, a)).abs();
                    let w = ground.distance(&agg[i * na + a], &agg[j * na + a])?;
                    worst = worst.max(c_r * reward_gap + c_t * w);
                }
                next[i * ns + j] = worst;
                next[j * ns + i] = worst;
            }
        }
        Ok(next)
    })
}

/// Lax bisimulation metric over state-action pairs, indexed `s * n_actions + a`.
pub fn lax_bisim_metric(mdp: &FiniteMdp, c_r: f64, c_t: f64, tol: f64) -> Result<MetricTable> {
    check_weights(c_r, c_t, tol)?;
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let np = ns * na;
    fixed_point(np, c_r, c_t, tol, |d| {
        let ds = hausdorff_states(d, ns, na);
        let ground = Ground::new(&ds, ns);
        let agg = ground.aggregate(mdp);
        let mut next = vec![0.0; np * np];
        for x in 0..np {
            for y in x + 1..np {
                let reward_gap = (mdp.reward(x / na, x % na) - mdp.reward(y / na, y % na)).abs();
                let w = ground.distance(&agg[x], &agg[y])?;
                let value = c_r * reward_gap + c_t * w;
                next[x * np + y] = value;
                next[y * np + x] = value;
            }
        }
        Ok(next)
    })
}

/// State metric induced by a pair metric: symmetric Hausdorff distance between action sets.
pub fn hausdorff_states(pair_d: &[f64], n_states: usize, n_actions: usize) -> Vec<f64> {
    let np = n_states * n_actions;
    let directed = |s: usize, t: usize| {
        (0..n_actions)
            .map(|a| {
                (0..n_actions)
                    .map(|b| pair_d[(s * n_actions + a) * np + t * n_actions + b])
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max)
    };
    let mut out = vec![0.0; n_states * n_states];
    for s in 0..n_states {
        for t in s + 1..n_states {
            let v = directed(s, t).max(directed(t, s));
            out[s * n_states + t] = v;
            out[t * n_states + s] = v;
        }
    }
    out
}

/// Lifts a lax pair table to the state metric it induces.
pub fn lax_state_metric(table: &MetricTable, n_actions: usize) -> MetricTable {
    let ns = table.size / n_actions;
    MetricTable {
        d: hausdorff_states(&table.d, ns, n_actions),
        size: ns,
        ..table.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{mirrored_mdp, random_mdp};
    use crate::homomorphism::{minimize_lax, pair_classes};
    use proptest::prelude::*;

    fn absorbing(r1: f64, r2: f64) -> FiniteMdp {
        FiniteMdp::new(
            vec![vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 2]],
            vec![vec![r1, r1], vec![r2, r2]],
            0.9,
        )
        .unwrap()
    }

    fn assert_pseudometric(t: &MetricTable) {
        let n = t.size;
        for i in 0..n {
            assert_eq!(t.get(i, i), 0.0);
            for j in 0..n {
                assert!(t.get(i, j) >= 0.0);
                assert_eq!(t.get(i, j), t.get(j, i));
                for k in 0..n {
                    assert!(t.get(i, k) <= t.get(i, j) + t.get(j, k) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn identical_states_are_at_distance_zero() {
        let mdp = FiniteMdp::new(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
            vec![vec![0.3], vec![0.3]],
            0.9,
        )
        .unwrap();
        let t = bisim_metric(&mdp, 1.0, 0.9, 1e-10).unwrap();
        assert_eq!(t.get(0, 1), 0.0);
    }

    #[test]
    fn absorbing_pair_solves_scalar_fixed_point() {
        let (r1, r2, c_t) = (1.0, 0.25, 0.5);
        let t = bisim_metric(&absorbing(r1, r2), 1.0, c_t, 1e-12).unwrap();
        let expected = (r1 - r2) / (1.0 - c_t);
        assert!((t.get(0, 1) - expected).abs() <= 1e-12);
        let lax = lax_bisim_metric(&absorbing(r1, r2), 1.0, c_t, 1e-12).unwrap();
        assert!((lax.get(0, 2) - expected).abs() <= 1e-12);
        assert_eq!(lax.get(0, 1), 0.0);
    }

    #[test]
    fn residual_contracts_geometrically() {
        let mdp = random_mdp(5, 4, 2, 0.9);
        let t = bisim_metric(&mdp, 1.0, 0.5, 1e-10).unwrap();
        for w in t.residual_history.windows(2) {
            if w[0] > 0.0 {
                assert!(w[1] <= 0.5 * w[0] + 1e-15, "{} -> {}", w[0], w[1]);
            }
        }
        assert_pseudometric(&t);
    }

    #[test]
    fn pair_with_itself_is_zero_and_reward_gap_survives() {
        let mdp = FiniteMdp::new(vec![vec![vec![1.0], vec![1.0]]], vec![vec![0.0, 1.0]], 0.9).unwrap();
        let t = lax_bisim_metric(&mdp, 1.0, 0.9, 1e-10).unwrap();
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(0, 1), 1.0);
    }

    #[test]
    fn single_state_has_one_zero_entry() {
        let mdp = FiniteMdp::new(vec![vec![vec![1.0]]], vec![vec![2.0]], 0.9).unwrap();
        let t = bisim_metric(&mdp, 1.0, 0.9, 1e-10).unwrap();
        assert_eq!(t.d, vec![0.0]);
    }

    #[test]
    fn contraction_factor_one_is_rejected() {
        let mdp = absorbing(0.0, 1.0);
        assert!(matches!(bisim_metric(&mdp, 1.0, 1.0, 1e-9), Err(MdpError::NoConvergence(_))));
        assert!(matches!(lax_bisim_metric(&mdp, 1.0, 1.2, 1e-9), Err(MdpError::NoConvergence(_))));
    }

    #[test]
    fn lax_zeros_match_minimization_on_mirrors() {
        let base = random_mdp(21, 3, 2, 0.9);
        let (mdp, _) = mirrored_mdp(&base, 4, true);
        let (h, _) = minimize_lax(&mdp, 0.0).unwrap();
        let lax = lax_bisim_metric(&mdp, 1.0, 0.5, 1e-10).unwrap();
        let states = lax_state_metric(&lax, 2);
        assert_eq!(states.zero_classes(), h.state_map());
        assert_eq!(lax.zero_classes(), pair_classes(&mdp, h.state_map()));

        // Mirrored states need their actions relabelled, so strict bisimulation separates them.
        let strict = bisim_metric(&mdp, 1.0, 0.5, 1e-10).unwrap();
        assert!(strict.get(0, 3) > 0.0);
        assert_eq!(states.get(0, 3), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn metrics_are_pseudometrics(seed in 0u64..10_000) {
            let mdp = random_mdp(seed, 4, 2, 0.9);
            assert_pseudometric(&bisim_metric(&mdp, 1.0, 0.5, 1e-9).unwrap());
            let lax = lax_bisim_metric(&mdp, 1.0, 0.5, 1e-9).unwrap();
            assert_pseudometric(&lax);
            assert_pseudometric(&lax_state_metric(&lax, 2));
        }
    }
}
