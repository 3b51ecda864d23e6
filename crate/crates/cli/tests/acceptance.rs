//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//!
//! Runs under `cargo test`; pass criterion numbers after `--` to run a subset, e.g.
//! `cargo test -p homdp-cli --test acceptance -- 3 10`. Criterion 9 trains ten agents for
//! 100k steps each and dominates the runtime (roughly 75 minutes on one core).
//!
//! Reference values come from oracles written here, independent of the library code paths
//! under test: dense linear solves and policy iteration for finite values, a textbook
//! two-phase simplex for transport, naive partition refinement for lax bisimulation, and a
//! doubling series for LQR values.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use homdp_cli::manifest::RunManifest;
use homdp_cli::verify::hpg_instance;
use homdp_control::envs::{lqr_solve, pendulum_step, random_invertible, wrap_angle, LinearQuadratic, Pendulum};
use homdp_control::grad_equiv::{
    check_gradient_equivalence, check_hpg_estimator, check_value_equivalence_lqr, check_value_equivalence_mc,
    odd_pendulum_policy, LinearHomomorphism, PendulumMap, PolicyNet, QGradientRoute,
};
use homdp_core::generators::{mirrored_mdp, random_mdp};
use homdp_core::homomorphism::{canonical_sum, lift_policy, minimize_lax, pair_classes, quotient_mdp};
use homdp_core::metrics::{bisim_metric, lax_bisim_metric, lax_state_metric};
use homdp_core::transport::kantorovich;
use homdp_core::{FiniteHomomorphism, FiniteMdp, TabularPolicy};

const VALUE_TOL: f64 = 1e-8;
const LIFT_TOL: f64 = 1e-15;
const TRANSPORT_TOL: f64 = 1e-9;
const AUTODIFF_GRAD_TOL: f64 = 1e-4;
const FD_GRAD_TOL: f64 = 1e-3;
const HPG_COSINE: f64 = 0.99;
const HPG_CORRUPTION: f64 = 0.5;
const MC_STDERRS: f64 = 3.0;
const PRIMITIVE_TOL: f64 = 1e-4;
const DDPG_RETURN: f64 = 700.0;
const DHPG_SLACK: f64 = 0.05;
const DIAGNOSTIC_SEEDS: usize = 4;
const SYMMETRY_FRACTION: f64 = 0.8;
const TRAIN_SEEDS: u64 = 5;
const TRAIN_STEPS: u64 = 100_000;
const SECONDS_PER_SEED: f64 = 30.0 * 60.0;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Verdict); 10] = [
        (1, "finite value equivalence", finite_value_equivalence),
        (2, "lifting identity", lifting_identity),
        (3, "transport oracle", transport_oracle),
        (4, "metric/relation consistency", metric_relation_consistency),
        (5, "gradient equivalence", gradient_equivalence),
        (6, "HPG estimator agreement", hpg_estimator_agreement),
        (7, "continuous value equivalence", continuous_value_equivalence),
        (8, "diff engine primitives", diff_engine_primitives),
        (9, "pendulum training", pendulum_training),
        (10, "rerun determinism", rerun_determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {message}"))
        });
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id} ({name}): {} [{:.1} s]", result.detail, start.elapsed().as_secs_f64());
        if !result.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------------------
// Finite oracles

/// `V^π` from the dense system `(I − γ P_π) V = r_π`, then `Q = r + γ P V`.
fn q_of_policy(mdp: &FiniteMdp, policy: &TabularPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut system = DMatrix::<f64>::identity(ns, ns);
    let mut rhs = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        for a in 0..na {
            let w = policy.prob(s, a);
            rhs[s] += w * mdp.reward(s, a);
            for (t, p) in mdp.transition_row(s, a).iter().enumerate() {
                system[(s, t)] -= mdp.gamma() * w * p;
            }
        }
    }
    let v = system.lu().solve(&rhs).expect("I − γP is invertible");
    q_from_v(mdp, v.as_slice())
}

fn q_from_v(mdp: &FiniteMdp, v: &[f64]) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let next: f64 = mdp.transition_row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            q[s * na + a] = mdp.reward(s, a) + mdp.gamma() * next;
        }
    }
    q
}

/// `Q*` by policy iteration with exact evaluations; switches only on strict improvement.
fn q_star(mdp: &FiniteMdp) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut actions = vec![0; ns];
    loop {
        let policy = TabularPolicy::deterministic(&actions, na).unwrap();
        let q = q_of_policy(mdp, &policy);
        let mut changed = false;
        for s in 0..ns {
            let row = &q[s * na..(s + 1) * na];
            let best = (0..na).fold(actions[s], |b, a| if row[a] > row[b] + 1e-12 { a } else { b });
            if best != actions[s] {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return q;
        }
    }
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let raw: Vec<f64> = (0..cols).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

/// `π↑(a|s) = π̄(g_s(a)|f(s)) / |g_s⁻¹(g_s(a))|`, computed from the definition.
fn lift_by_definition(abstract_policy: &TabularPolicy, h: &FiniteHomomorphism) -> Vec<Vec<f64>> {
    (0..h.n_states())
        .map(|s| {
            let map = &h.action_maps()[s];
            map.iter()
                .map(|&abar| {
                    let preimage = map.iter().filter(|&&x| x == abar).count() as f64;
                    abstract_policy.prob(h.state(s), abar) / preimage
                })
                .collect()
        })
        .collect()
}

fn finite_value_equivalence() -> Verdict {
    let start = Instant::now();
    let (mut policy_gap, mut optimal_gap, mut largest) = (0.0_f64, 0.0_f64, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..50u64 {
        let (ns, na) = (2 + (i as usize * 7) % 9, 1 + (i as usize * 3) % 5);
        let base = random_mdp(7000 + i, ns, na, 0.95);
        let (mdp, h) = mirrored_mdp(&base, 8000 + i, true);
        largest = largest.max(mdp.n_states());
        let (quotient, _) = quotient_mdp(&mdp, &h, 1e-12).expect("mirror collapse is exact");
        let abstract_policy =
            TabularPolicy::new(random_rows(&mut rng, quotient.n_states(), quotient.n_actions())).unwrap();
        let lifted = TabularPolicy::new(lift_by_definition(&abstract_policy, &h)).unwrap();

        let q = q_of_policy(&mdp, &lifted);
        let q_bar = q_of_policy(&quotient, &abstract_policy);
        let q_opt = q_star(&mdp);
        let q_opt_bar = q_star(&quotient);
        let nab = quotient.n_actions();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let k = h.state(s) * nab + h.action(s, a);
                policy_gap = policy_gap.max((q[s * mdp.n_actions() + a] - q_bar[k]).abs());
                optimal_gap = optimal_gap.max((q_opt[s * mdp.n_actions() + a] - q_opt_bar[k]).abs());
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        policy_gap <= VALUE_TOL && optimal_gap <= VALUE_TOL && seconds < 10.0,
        format!(
            "50 mirrored MDPs (up to {largest} states): max |Q^lift - Q_bar o h| {policy_gap:.2e}, max |Q* - Q*_bar o h| {optimal_gap:.2e} (tol {VALUE_TOL:.0e}); {seconds:.2} s (limit 10 s)"
        ),
    )
}

fn lifting_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let (ns, na) = (rng.random_range(1..=10), rng.random_range(1..=6));
        let blocks = rng.random_range(1..=ns);
        let abstract_actions = rng.random_range(1..=na);
        // Surjective by construction: the first indices cover every block and label.
        let mut state_map: Vec<usize> = (0..ns).map(|s| if s < blocks { s } else { rng.random_range(0..blocks) }).collect();
        state_map.reverse();
        let action_maps: Vec<Vec<usize>> = (0..ns)
            .map(|_| {
                let mut map: Vec<usize> =
                    (0..na).map(|a| if a < abstract_actions { a } else { rng.random_range(0..abstract_actions) }).collect();
                map.rotate_left(rng.random_range(0..na));
                map
            })
            .collect();
        let h = FiniteHomomorphism::new(state_map, action_maps).unwrap();
        let abstract_policy = TabularPolicy::new(random_rows(&mut rng, blocks, abstract_actions)).unwrap();
        let lifted = lift_policy(&abstract_policy, &h).unwrap();
        for s in 0..ns {
            for abar in 0..abstract_actions {
                let mass: f64 = (0..na).filter(|&a| h.action(s, a) == abar).map(|a| lifted.prob(s, a)).sum();
                worst = worst.max((mass - abstract_policy.prob(h.state(s), abar)).abs());
            }
        }
    }
    verdict(
        worst <= LIFT_TOL,
        format!("1000 random (policy, homomorphism) pairs: max |sum over preimage - pi_bar| {worst:.2e} (tol {LIFT_TOL:.0e})"),
    )
}

// ---------------------------------------------------------------------------------------
// Transport oracle: dense two-phase simplex with Bland's rule

/// Minimises `c·x` subject to `A x = b`, `x ≥ 0`, with `b ≥ 0`.
fn simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    const EPS: f64 = 1e-12;
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&a[i]);
            row[n + i] = 1.0;
            row[width - 1] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, col: usize) {
        let p = t[r][col];
        t[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
            }
        }
        let f = obj[col];
        obj.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
        basis[r] = col;
    }

    fn run(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], allowed: usize) {
        let rhs = obj.len() - 1;
        while let Some(col) = (0..allowed).find(|&j| obj[j] < -EPS) {
            let row = (0..t.len())
                .filter(|&i| t[i][col] > EPS)
                .min_by(|&i, &k| {
                    (t[i][rhs] / t[i][col])
                        .total_cmp(&(t[k][rhs] / t[k][col]))
                        .then(basis[i].cmp(&basis[k]))
                })
                .expect("transport LPs are bounded");
            pivot(t, obj, basis, row, col);
        }
    }

    // Phase 1: minimise the sum of artificials.
    let mut obj = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[width - 1] -= row[width - 1];
    }
    run(&mut t, &mut obj, &mut basis, n + m);
    assert!(-obj[width - 1] <= 1e-9, "infeasible marginals");
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t[r][j].abs() > EPS) {
                pivot(&mut t, &mut obj, &mut basis, r, col);
            }
        }
    }
    // Phase 2 over the original columns; redundant rows keep a zero-level artificial.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for r in 0..m {
        let cb = if basis[r] < n { c[basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                obj[j] -= cb * t[r][j];
            }
        }
    }
    run(&mut t, &mut obj, &mut basis, n);
    (0..m).filter(|&r| basis[r] < n).map(|r| c[basis[r]] * t[r][width - 1]).sum()
}

fn transport_lp(p: &[f64], q: &[f64], ground: &[f64]) -> f64 {
    let (m, n) = (p.len(), q.len());
    let mut rows = Vec::with_capacity(m + n);
    for i in 0..m {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|x| *x = 1.0);
        rows.push(row);
    }
    for j in 0..n {
        let mut row = vec![0.0; m * n];
        (0..m).for_each(|i| row[i * n + j] = 1.0);
        rows.push(row);
    }
    let b: Vec<f64> = p.iter().chain(q).copied().collect();
    simplex(&rows, &b, ground)
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Some atoms carry no mass, to exercise degenerate marginals.
    let raw: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random::<f64>() }).collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut d = vec![0.0; n];
        d[0] = 1.0;
        return d;
    }
    raw.into_iter().map(|x| x / total).collect()
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random(), rng.random()]).collect()
}

fn distances(xs: &[[f64; 2]], ys: &[[f64; 2]]) -> Vec<f64> {
    xs.iter()
        .flat_map(|x| ys.iter().map(move |y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()))
        .collect()
}

fn transport_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (p, q) = (random_distribution(&mut rng, m), random_distribution(&mut rng, n));
        let (xs, ys) = (points(&mut rng, m), points(&mut rng, n));
        let ground = distances(&xs, &ys);
        let w = kantorovich(&p, &q, &ground).unwrap();
        worst = worst.max((w - transport_lp(&p, &q, &ground)).abs());
    }

    let mut triples = 0;
    let mut violation = 0.0_f64;
    for _ in 0..200 {
        let k = rng.random_range(2..=8);
        let support = points(&mut rng, k);
        let ground = distances(&support, &support);
        let d: Vec<Vec<f64>> = (0..3).map(|_| random_distribution(&mut rng, k)).collect();
        let w = |i: usize, j: usize| kantorovich(&d[i], &d[j], &ground).unwrap();
        let (w01, w10, w12, w02) = (w(0, 1), w(1, 0), w(1, 2), w(0, 2));
        violation = violation
            .max(w(0, 0).abs())
            .max(-w01)
            .max((w01 - w10).abs())
            .max(w02 - w01 - w12);
        triples += 1;
    }
    verdict(
        worst <= TRANSPORT_TOL && violation <= TRANSPORT_TOL,
        format!(
            "200 instances: max |kantorovich - simplex LP| {worst:.2e}; {triples} triples: max axiom violation {violation:.2e} (tol {TRANSPORT_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Lax bisimulation by naive refinement

/// Block label per state, numbered by first occurrence.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut seen = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(*l).or_insert(next)
        })
        .collect()
}

/// Coarsest partition in which related states offer the same set of (reward, block mass)
/// signatures, refined from the trivial partition until stable.
fn lax_refinement(mdp: &FiniteMdp) -> Vec<usize> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut block = vec![0usize; ns];
    loop {
        let n_blocks = block.iter().max().unwrap() + 1;
        let signature = |s: usize, a: usize| -> Vec<u64> {
            let mut buckets = vec![Vec::new(); n_blocks];
            for (t, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p != 0.0 {
                    buckets[block[t]].push(p);
                }
            }
            std::iter::once(mdp.reward(s, a).to_bits())
                .chain(buckets.iter_mut().map(|b| canonical_sum(b).to_bits()))
                .collect()
        };
        let keys: Vec<(usize, Vec<Vec<u64>>)> = (0..ns)
            .map(|s| {
                let mut set: Vec<Vec<u64>> = (0..na).map(|a| signature(s, a)).collect();
                set.sort();
                set.dedup();
                (block[s], set)
            })
            .collect();
        let mut ids = BTreeMap::new();
        let next: Vec<usize> = keys
            .into_iter()
            .map(|k| {
                let n = ids.len();
                *ids.entry(k).or_insert(n)
            })
            .collect();
        let next = canonical(&next);
        if next == canonical(&block) {
            return next;
        }
        block = next;
    }
}

fn metric_relation_consistency() -> Verdict {
    let (mut mismatches, mut pair_mismatches, mut oracle_mismatches, mut separated) = (0, 0, 0, 0);
    for i in 0..20u64 {
        let (ns, na) = (2 + i as usize % 3, 2 + i as usize % 2);
        let (mdp, _) = mirrored_mdp(&random_mdp(9000 + i, ns, na, 0.9), 9100 + i, true);
        let (h, _) = minimize_lax(&mdp, 0.0).unwrap();
        let partition = canonical(h.state_map());
        if lax_refinement(&mdp) != partition {
            oracle_mismatches += 1;
        }
        let pairs = lax_bisim_metric(&mdp, 1.0, 0.5, 1e-10).unwrap();
        let states = lax_state_metric(&pairs, na);
        if canonical(&states.zero_classes()) != partition {
            mismatches += 1;
        }
        if canonical(&pairs.zero_classes()) != canonical(&pair_classes(&mdp, h.state_map())) {
            pair_mismatches += 1;
        }
        let strict = bisim_metric(&mdp, 1.0, 0.5, 1e-10).unwrap();
        let n = mdp.n_states();
        if (0..n).any(|s| (s + 1..n).any(|t| states.get(s, t) == 0.0 && strict.get(s, t) > 0.0)) {
            separated += 1;
        }
    }
    verdict(
        mismatches == 0 && pair_mismatches == 0 && oracle_mismatches == 0 && separated > 0,
        format!(
            "20 mirrored MDPs: state-kernel mismatches {mismatches}, pair-kernel mismatches {pair_mismatches}, minimize_lax vs refinement oracle mismatches {oracle_mismatches}; strict/lax separation on {separated} instances"
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Continuous criteria

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn gradient_equivalence() -> Verdict {
    let start = Instant::now();
    let (mut autodiff, mut fd) = (0.0_f64, 0.0_f64);
    for i in 0..20u64 {
        let env = LinearQuadratic::random_instance(1100 + i, 2, 2, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1200 + i);
        let hom = LinearHomomorphism::new(random_invertible(&mut rng, 2), random_invertible(&mut rng, 2)).unwrap();
        let policy = PolicyNet::random_tanh(&[2, 16, 2], &mut rng);
        let probes: Vec<_> = (0..5).map(|_| normal_vector(&mut rng, 2)).collect();
        let run = |route| check_gradient_equivalence(&env, &hom, &policy, &probes, route, 0.9, 1e-5).unwrap();
        autodiff = autodiff.max(run(QGradientRoute::Autodiff).max_rel_error);
        fd = fd.max(run(QGradientRoute::FiniteDifference).max_rel_error);
    }
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        autodiff <= AUTODIFF_GRAD_TOL && fd <= FD_GRAD_TOL && seconds < 60.0,
        format!(
            "20 LQR instances, tanh MLP policies: max relative error {autodiff:.2e} analytic (tol {AUTODIFF_GRAD_TOL:.0e}), {fd:.2e} finite-difference (tol {FD_GRAD_TOL:.0e}); {seconds:.1} s (limit 60 s)"
        ),
    )
}

fn hpg_estimator_agreement() -> Verdict {
    let (env, hom, theta) = hpg_instance().unwrap();
    let clean = check_hpg_estimator(&env, &hom, &theta, 0.9, 100_000, 17, 0.0).unwrap();
    let broken = check_hpg_estimator(&env, &hom, &theta, 0.9, 100_000, 17, HPG_CORRUPTION).unwrap();
    verdict(
        clean.cosine_similarity >= HPG_COSINE && broken.cosine_similarity < HPG_COSINE,
        format!(
            "1e5 shared samples: cosine {:.5} (needs >= {HPG_COSINE}); reward invariance broken by {HPG_CORRUPTION}: {:.5} (needs < {HPG_COSINE})",
            clean.cosine_similarity, broken.cosine_similarity
        ),
    )
}

/// `P = Σ_k γ^k (Mᵀ)^k C M^k` by repeated doubling.
fn lyapunov_series(m: &DMatrix<f64>, c: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let mut p = c.clone();
    let mut step = m * gamma.sqrt();
    for _ in 0..64 {
        let next = &p + step.transpose() * &p * &step;
        step = &step * &step;
        if (&next - &p).amax() <= 1e-15 * next.amax() {
            return next;
        }
        p = next;
    }
    p
}

fn continuous_value_equivalence() -> Verdict {
    let gamma = 0.95;
    let mut oracle_gap = 0.0_f64;
    let mut library_gap = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let instances = 5;
    for i in 0..instances {
        let env = LinearQuadratic::random_instance(1300 + i, 2, 2, 0.0, 1.0);
        let f = random_invertible(&mut rng, 2);
        let g = random_invertible(&mut rng, 2);
        let theta = -lqr_solve(&env, gamma).unwrap().gain.unwrap();
        let (f_inv, g_inv) = (f.clone().try_inverse().unwrap(), g.clone().try_inverse().unwrap());
        let value = lyapunov_series(&(&env.a + &env.b * &theta), &(&env.q + theta.transpose() * &env.r * &theta), gamma);
        let (a_bar, b_bar) = (&f * &env.a * &f_inv, &f * &env.b * &g_inv);
        let (q_bar, r_bar) = (f_inv.transpose() * &env.q * &f_inv, g_inv.transpose() * &env.r * &g_inv);
        let theta_bar = &g * &theta * &f_inv;
        let value_bar = lyapunov_series(&(&a_bar + &b_bar * &theta_bar), &(q_bar + theta_bar.transpose() * r_bar * &theta_bar), gamma);
        let probes: Vec<_> = (0..100).map(|_| normal_vector(&mut rng, 2)).collect();
        for s in &probes {
            let s_bar = &f * s;
            let v = -(s.transpose() * &value * s)[0];
            let v_bar = -(s_bar.transpose() * &value_bar * &s_bar)[0];
            oracle_gap = oracle_gap.max((v - v_bar).abs() / v.abs().max(1.0));
        }
        let hom = LinearHomomorphism::new(f, g).unwrap();
        library_gap = library_gap.max(check_value_equivalence_lqr(&env, &hom, &theta, gamma, &probes).unwrap().max_abs_gap);
    }

    // Paired Monte Carlo under the reflection, simulated here from the step function alone.
    let (sigma, horizon, rollouts, mc_gamma) = (0.3, 200, 20, 0.99);
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    let mut worst_ratio = 0.0_f64;
    for _ in 0..20 {
        let start = [rng.random_range(-std::f64::consts::PI..std::f64::consts::PI), rng.random_range(-1.0..1.0)];
        let (mut returns, mut returns_bar) = (Vec::new(), Vec::new());
        for _ in 0..rollouts {
            let (mut s, mut s_bar) = (start, [wrap_angle(-start[0]), -start[1]]);
            let (mut total, mut total_bar, mut discount) = (0.0, 0.0, 1.0);
            for _ in 0..horizon {
                let z: f64 = StandardNormal.sample(&mut rng);
                // Lifted policy: g⁻¹(π̄(f(s))) with f, g both negation.
                let lifted = -odd_pendulum_policy(&[-s[0], -s[1]]);
                let (next, r) = pendulum_step(s, lifted + sigma * z);
                let (next_bar, r_bar) = pendulum_step(s_bar, odd_pendulum_policy(&s_bar) - sigma * z);
                total += discount * r;
                total_bar += discount * r_bar;
                discount *= mc_gamma;
                (s, s_bar) = (next, next_bar);
            }
            returns.push(total);
            returns_bar.push(total_bar);
        }
        let k = rollouts as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / k;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
        let (m, m_bar) = (mean(&returns), mean(&returns_bar));
        let stderr = (var(&returns, m) / k + var(&returns_bar, m_bar) / k).sqrt();
        let gap = (m - m_bar).abs();
        let ratio = if gap == 0.0 { 0.0 } else { gap / stderr };
        worst_ratio = worst_ratio.max(ratio);
    }
    let env = Pendulum {
        action_noise_std: sigma,
        ..Pendulum::default()
    };
    let policy = |s: &[f64]| odd_pendulum_policy(s);
    let library = check_value_equivalence_mc(&env, &PendulumMap::Flip, &policy, &policy, 20, rollouts, horizon, mc_gamma, 709).unwrap();

    verdict(
        oracle_gap <= VALUE_TOL && library_gap <= VALUE_TOL && worst_ratio <= MC_STDERRS && library.within_stderrs(MC_STDERRS),
        format!(
            "LQR sigma=0, {instances}x100 probes: series oracle gap {oracle_gap:.2e}, library gap {library_gap:.2e} (tol {VALUE_TOL:.0e}); pendulum reflection: {worst_ratio:.2} stderr (oracle), {:.2} stderr (library), limit {MC_STDERRS}",
            library.max_gap_in_stderrs
        ),
    )
}

fn diff_engine_primitives() -> Verdict {
    const REQUIRED: [&str; 13] = [
        "matmul", "add", "mul", "tanh", "relu", "sum", "mean", "square", "abs", "l1_norm", "gaussian_sample", "clip", "concat",
    ];
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 0..100 {
        for (name, err) in homdp_autodiff::gradcheck::primitive_suite(seed) {
            let e = worst.entry(name).or_insert(0.0);
            *e = e.max(err);
        }
    }
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|p| !worst.contains_key(p)).collect();
    let (name, err) = worst.iter().fold(("", 0.0_f64), |acc, (n, e)| if *e > acc.1 { (n, *e) } else { acc });
    verdict(
        missing.is_empty() && err <= PRIMITIVE_TOL,
        format!(
            "{} primitives x 100 seeds: max relative error {err:.2e} ({name}), tol {PRIMITIVE_TOL:.0e}; missing {missing:?}",
            worst.len()
        ),
    )
}

// ---------------------------------------------------------------------------------------
// Criteria driven through the binary

fn homdp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_homdp")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct TrainedRun {
    final_return: f64,
    diagnostic_10k: Option<f64>,
    diagnostic_100k: Option<f64>,
    symmetry_fraction: Option<f64>,
    seconds: f64,
}

fn train(root: &Path, config: &Path, variant: &str, seed: u64) -> TrainedRun {
    let out = root.join(format!("{variant}-seed{seed}"));
    let seed_arg = seed.to_string();
    let steps = TRAIN_STEPS.to_string();
    let args = [
        "train", "--env", "pendulum", "--variant", variant, "--seed", &seed_arg, "--steps", &steps,
        "--config", config.to_str().unwrap(), "--quiet", "--out", out.to_str().unwrap(),
    ];
    let result = homdp(&args);
    assert!(result.status.success(), "{variant} seed {seed}: {}", String::from_utf8_lossy(&result.stderr));
    let summary = read_json(&out.join("summary.json"));
    let manifest = RunManifest::load(out.join("manifest.json")).unwrap();
    let at = |step: u64| {
        summary["value_equiv_trace"]
            .as_array()
            .unwrap()
            .iter()
            .find(|e| e[0].as_u64() == Some(step))
            .and_then(|e| e[1].as_f64())
    };
    TrainedRun {
        final_return: summary["final_return"].as_f64().unwrap(),
        diagnostic_10k: at(10_000),
        diagnostic_100k: at(TRAIN_STEPS),
        symmetry_fraction: summary["symmetry"]["fraction_within"].as_f64(),
        seconds: manifest.wall_clock_seconds,
    }
}

fn pendulum_training() -> Verdict {
    let root = scratch("training");
    // The default noise schedule decays over 10⁶ steps; these runs decay it over their own
    // length instead. Every other setting keeps its default.
    let config = root.join("config.json");
    let schedule = serde_json::json!({ "exploration_std": { "start": 1.0, "end": 0.1, "duration": TRAIN_STEPS } });
    std::fs::write(&config, schedule.to_string()).unwrap();
    let mut ddpg = Vec::new();
    let mut dhpg = Vec::new();
    for seed in 0..TRAIN_SEEDS {
        ddpg.push(train(&root, &config, "ddpg", seed));
        dhpg.push(train(&root, &config, "dhpg_summed", seed));
    }
    let mean = |runs: &[TrainedRun]| runs.iter().map(|r| r.final_return).sum::<f64>() / runs.len() as f64;
    let (ddpg_mean, dhpg_mean) = (mean(&ddpg), mean(&dhpg));
    let decreasing = dhpg
        .iter()
        .filter(|r| matches!((r.diagnostic_10k, r.diagnostic_100k), (Some(a), Some(b)) if b < a))
        .count();
    let symmetric = dhpg.iter().filter(|r| r.symmetry_fraction.is_some_and(|f| f >= SYMMETRY_FRACTION)).count();
    let slowest = ddpg.iter().zip(&dhpg).map(|(a, b)| a.seconds + b.seconds).fold(0.0, f64::max);

    let a = ddpg_mean >= DDPG_RETURN;
    let b = dhpg_mean >= (1.0 - DHPG_SLACK) * ddpg_mean && decreasing >= DIAGNOSTIC_SEEDS;
    let c = symmetric == dhpg.len();
    let runtime = slowest <= SECONDS_PER_SEED;
    let list = |f: &dyn Fn(&TrainedRun) -> String, runs: &[TrainedRun]| runs.iter().map(f).collect::<Vec<_>>().join(" ");
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    verdict(
        a && b && c && runtime,
        format!(
            "(a) ddpg mean final return {ddpg_mean:.1} (needs >= {DDPG_RETURN}) [{}]; \
             (b) dhpg_summed {dhpg_mean:.1} (needs >= {:.1}) [{}], diagnostic 10k->100k decreasing on {decreasing}/{TRAIN_SEEDS} (needs {DIAGNOSTIC_SEEDS}) [{}]; \
             (c) symmetry fraction >= {SYMMETRY_FRACTION} on {symmetric}/{TRAIN_SEEDS} [{}]; \
             slowest seed pair {:.0} s (limit {SECONDS_PER_SEED:.0} s); verdicts a={a} b={b} c={c}",
            list(&|r| format!("{:.1}", r.final_return), &ddpg),
            (1.0 - DHPG_SLACK) * ddpg_mean,
            list(&|r| format!("{:.1}", r.final_return), &dhpg),
            list(&|r| format!("{}->{}", opt(r.diagnostic_10k), opt(r.diagnostic_100k)), &dhpg),
            list(&|r| opt(r.symmetry_fraction), &dhpg),
            slowest,
        ),
    )
}

fn rerun_determinism() -> Verdict {
    let root = scratch("determinism");
    let (mdp, collapse) = mirrored_mdp(&random_mdp(5, 3, 2, 0.9), 6, true);
    let mdp_path = root.join("mirror.json");
    let hom_path = root.join("collapse.json");
    std::fs::write(&mdp_path, mdp.to_json_string()).unwrap();
    std::fs::write(&hom_path, collapse.to_json_string()).unwrap();
    let config = root.join("agent.json");
    std::fs::write(&config, r#"{"seed_frames": 500, "exploration_steps": 300, "batch_size": 64, "hidden": 64, "eval_episodes": 2}"#).unwrap();
    let (m, h, c) = (mdp_path.to_str().unwrap(), hom_path.to_str().unwrap(), config.to_str().unwrap());

    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("quotient", vec!["quotient", m, h]),
        ("minimize", vec!["minimize", m]),
        ("metrics-bisim", vec!["metrics", m, "--kind", "bisim"]),
        ("metrics-lax", vec!["metrics", m, "--kind", "lax"]),
        ("verify", vec!["verify", "--suite", "finite"]),
        ("train-dhpg", vec!["train", "--variant", "dhpg_summed", "--seed", "4", "--steps", "3000", "--config", c, "--quiet"]),
        ("train-ddpg", vec!["train", "--variant", "ddpg", "--seed", "4", "--steps", "3000", "--config", c, "--quiet"]),
    ];
    let (mut compared, mut mismatched) = (0, Vec::new());
    for (name, args) in commands {
        let first = root.join(format!("{name}-first"));
        let second = root.join(format!("{name}-second"));
        let mut full = args.clone();
        full.extend(["--out", first.to_str().unwrap()]);
        let out = homdp(&full);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let manifest_path = first.join("manifest.json");
        let out = homdp(&["rerun", manifest_path.to_str().unwrap(), "--out", second.to_str().unwrap()]);
        assert!(out.status.success(), "rerun {name}: {}", String::from_utf8_lossy(&out.stderr));
        let (a, b) = (RunManifest::load(&manifest_path).unwrap(), RunManifest::load(second.join("manifest.json")).unwrap());
        if a.outputs != b.outputs || a.config != b.config {
            mismatched.push(format!("{name}/manifest"));
        }
        for file in &a.outputs {
            compared += 1;
            if std::fs::read(first.join(file)).unwrap() != std::fs::read(second.join(file)).unwrap() {
                mismatched.push(format!("{name}/{file}"));
            }
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("7 commands rerun from their manifests: {compared} output files compared, differing: {mismatched:?}"),
    )
}
