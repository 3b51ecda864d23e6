//! The `verify` suites: seeded numerical checks that homomorphic images preserve values
//! and policy gradients, plus the transport, metric, and differentiation machinery they
//! rest on.
//!
//! The finite suite touches only `homdp-core`. Each check yields a JSON-serialisable
//! outcome with a pass flag; nothing here reads the clock, so reports are reproducible.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;

use homdp_control::envs::{lqr_solve, linear_policy_value, random_invertible, wrap_angle, LinearQuadratic, Pendulum};
use homdp_control::grad_equiv::{
    check_gradient_equivalence, check_hpg_estimator, check_optimal_value_equivalence,
    check_value_equivalence_lqr, check_value_equivalence_mc, odd_pendulum_policy, AnalyticHomomorphism, LinearHomomorphism,
    PendulumMap, PolicyNet, QGradientRoute,
};
use homdp_core::generators::{mirrored_mdp, random_mdp, random_policy};
use homdp_core::homomorphism::{lift_policy, minimize_lax, verify_optimal_value_equivalence, verify_value_equivalence};
use homdp_core::metrics::{bisim_metric, lax_bisim_metric, lax_state_metric};
use homdp_core::transport::{kantorovich, solve_transport};
use homdp_core::{FiniteHomomorphism, MdpError};

use crate::error::Result;

pub const VALUE_TOL: f64 = 1e-8;
pub const LIFT_TOL: f64 = 1e-15;
pub const TRANSPORT_TOL: f64 = 1e-9;
pub const AUTODIFF_GRAD_TOL: f64 = 1e-4;
pub const FD_GRAD_TOL: f64 = 1e-3;
pub const HPG_COSINE: f64 = 0.99;
pub const HPG_CORRUPTION: f64 = 0.5;
/// Factor on the image state cost in the LQR negative control.
pub const LQR_COST_CORRUPTION: f64 = 1.5;
pub const MC_STDERRS: f64 = 3.0;
pub const PRIMITIVE_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Finite,
    Continuous,
    Gradients,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::All => "all",
            Self::Finite => "finite",
            Self::Continuous => "continuous",
            Self::Gradients => "gradients",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        <Self as clap::ValueEnum>::from_str(s, false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub details: serde_json::Value,
}

/// Runs every check of `suite`. With `negative_control`, every check that takes a
/// homomorphism as given is fed a broken one, so all of those must fail: the finite collapse
/// maps swap two states, the LQR images get a rescaled state cost, the pendulum map rotates
/// the angle instead of reflecting it, and the policy-gradient estimator loses reward
/// invariance. The remaining checks do not depend on a supplied homomorphism.
pub fn run_suite(suite: Suite, negative_control: bool) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    if suite.includes(Suite::Finite) {
        out.push(finite_value_equivalence(negative_control)?);
        out.push(lifting_identity()?);
        out.push(transport_certificates()?);
        out.push(metric_consistency()?);
    }
    if suite.includes(Suite::Continuous) {
        out.push(lqr_value_equivalence(negative_control)?);
        out.push(lqr_optimal_value_equivalence(negative_control)?);
        out.push(pendulum_value_equivalence(negative_control)?);
    }
    if suite.includes(Suite::Gradients) {
        out.push(gradient_equivalence()?);
        out.push(hpg_estimator(negative_control)?);
        out.push(primitive_gradients());
    }
    Ok(out)
}

fn outcome(suite: Suite, name: &'static str, passed: bool, summary: String, details: serde_json::Value) -> CheckOutcome {
    CheckOutcome {
        suite,
        name,
        passed,
        summary,
        details,
    }
}

/// Swaps the abstract images of states 0 and 1 in the first copy, leaving their mirrors.
fn corrupt(h: &FiniteHomomorphism) -> Result<FiniteHomomorphism> {
    let mut state_map = h.state_map().to_vec();
    state_map.swap(0, 1);
    Ok(FiniteHomomorphism::new(state_map, h.action_maps().to_vec())?)
}

fn finite_value_equivalence(negative_control: bool) -> Result<CheckOutcome> {
    let instances = 50;
    let (mut policy_gap, mut optimal_gap) = (0.0_f64, 0.0_f64);
    let mut inconsistent = 0;
    for i in 0..instances {
        let (ns, na) = (2 + i % 9, 1 + i % 5);
        let base = random_mdp(1000 + i as u64, ns, na, 0.9);
        let (mdp, collapse) = mirrored_mdp(&base, 2000 + i as u64, true);
        let h = if negative_control { corrupt(&collapse)? } else { collapse };
        let policy = random_policy(3000 + i as u64, ns, na);
        let gaps = verify_value_equivalence(&mdp, &h, &policy, 1e-11)
            .and_then(|g| Ok((g, verify_optimal_value_equivalence(&mdp, &h, 1e-11)?)));
        match gaps {
            Ok((g, g_star)) => {
                policy_gap = policy_gap.max(g);
                optimal_gap = optimal_gap.max(g_star);
            }
            Err(MdpError::InconsistentQuotient { .. }) => inconsistent += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let passed = inconsistent == 0 && policy_gap <= VALUE_TOL && optimal_gap <= VALUE_TOL;
    Ok(outcome(
        Suite::Finite,
        "finite_value_equivalence",
        passed,
        format!(
            "{instances} mirrored MDPs: max policy gap {policy_gap:.2e}, max optimal gap {optimal_gap:.2e}, {inconsistent} inconsistent quotients"
        ),
        json!({
            "instances": instances,
            "max_policy_value_gap": policy_gap,
            "max_optimal_value_gap": optimal_gap,
            "inconsistent_quotients": inconsistent,
            "tolerance": VALUE_TOL,
            "negative_control": negative_control,
        }),
    ))
}

/// A surjective homomorphism with random block structure.
pub fn random_homomorphism(rng: &mut impl Rng, n_states: usize, n_actions: usize) -> Result<FiniteHomomorphism> {
    let n_blocks = rng.random_range(1..=n_states);
    let n_abstract_actions = rng.random_range(1..=n_actions);
    let state_map = (0..n_states)
        .map(|s| if s < n_blocks { s } else { rng.random_range(0..n_blocks) })
        .collect();
    let action_maps = (0..n_states)
        .map(|_| {
            let mut map: Vec<usize> = (0..n_actions)
                .map(|a| if a < n_abstract_actions { a } else { rng.random_range(0..n_abstract_actions) })
                .collect();
            for i in (1..map.len()).rev() {
                map.swap(i, rng.random_range(0..=i));
            }
            map
        })
        .collect();
    Ok(FiniteHomomorphism::new(state_map, action_maps)?)
}

fn lifting_identity() -> Result<CheckOutcome> {
    let pairs = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let (ns, na) = (rng.random_range(1..=12), rng.random_range(1..=5));
        let h = random_homomorphism(&mut rng, ns, na)?;
        let abstract_policy = random_policy(rng.random(), h.n_abstract_states(), h.n_abstract_actions());
        let lifted = lift_policy(&abstract_policy, &h)?;
        for s in 0..ns {
            let mut mass = vec![0.0; h.n_abstract_actions()];
            for a in 0..na {
                mass[h.action(s, a)] += lifted.prob(s, a);
            }
            for (abar, m) in mass.iter().enumerate() {
                worst = worst.max((m - abstract_policy.prob(h.state(s), abar)).abs());
            }
        }
    }
    Ok(outcome(
        Suite::Finite,
        "lifting_identity",
        worst <= LIFT_TOL,
        format!("{pairs} random (policy, homomorphism) pairs: max preimage mass error {worst:.2e}"),
        json!({ "pairs": pairs, "max_error": worst, "tolerance": LIFT_TOL }),
    ))
}

fn distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn euclidean_ground(rng: &mut impl Rng, m: usize, n: usize) -> Vec<f64> {
    let xs: Vec<[f64; 2]> = (0..m).map(|_| [rng.random(), rng.random()]).collect();
    let ys: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    xs.iter()
        .flat_map(|x| ys.iter().map(move |y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()))
        .collect()
}

/// Primal feasibility, dual feasibility and a zero duality gap certify an LP optimum.
fn transport_certificates() -> Result<CheckOutcome> {
    let instances = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_gap, mut worst_infeasibility, mut worst_marginal) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..instances {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (p, q) = (distribution(&mut rng, m), distribution(&mut rng, n));
        let ground = euclidean_ground(&mut rng, m, n);
        let sol = solve_transport(&p, &q, |i, j| ground[i * n + j])?;
        let (mut rows, mut cols) = (vec![0.0; m], vec![0.0; n]);
        for &(i, j, mass) in &sol.plan {
            rows[i] += mass;
            cols[j] += mass;
        }
        for (a, b) in rows.iter().zip(&p).chain(cols.iter().zip(&q)) {
            worst_marginal = worst_marginal.max((a - b).abs());
        }
        for i in 0..m {
            for j in 0..n {
                worst_infeasibility = worst_infeasibility.max(sol.u[i] + sol.v[j] - ground[i * n + j]);
            }
        }
        let dual: f64 = p.iter().zip(&sol.u).map(|(a, b)| a * b).sum::<f64>()
            + q.iter().zip(&sol.v).map(|(a, b)| a * b).sum::<f64>();
        let via_kantorovich = kantorovich(&p, &q, &ground)?;
        worst_gap = worst_gap
            .max((dual - sol.cost).abs())
            .max((via_kantorovich - sol.cost).abs());
    }

    // Metric axioms of W₁ on a shared Euclidean support.
    let support = 6;
    let ground = {
        let pts: Vec<[f64; 2]> = (0..support).map(|_| [rng.random(), rng.random()]).collect();
        let mut g = vec![0.0; support * support];
        for i in 0..support {
            for j in 0..support {
                g[i * support + j] = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            }
        }
        g
    };
    let mut axiom_violation = 0.0_f64;
    for _ in 0..100 {
        let d: Vec<Vec<f64>> = (0..3).map(|_| distribution(&mut rng, support)).collect();
        let w = |a: usize, b: usize| kantorovich(&d[a], &d[b], &ground);
        axiom_violation = axiom_violation
            .max(w(0, 0)?.abs())
            .max((w(0, 1)? - w(1, 0)?).abs())
            .max(w(0, 2)? - w(0, 1)? - w(1, 2)?);
    }
    let passed = worst_gap <= TRANSPORT_TOL
        && worst_infeasibility <= TRANSPORT_TOL
        && worst_marginal <= TRANSPORT_TOL
        && axiom_violation <= TRANSPORT_TOL;
    Ok(outcome(
        Suite::Finite,
        "transport_certificates",
        passed,
        format!(
            "{instances} instances: duality gap {worst_gap:.2e}, dual infeasibility {worst_infeasibility:.2e}, marginal error {worst_marginal:.2e}; metric axioms violated by {axiom_violation:.2e}"
        ),
        json!({
            "instances": instances,
            "max_duality_gap": worst_gap,
            "max_dual_infeasibility": worst_infeasibility,
            "max_marginal_error": worst_marginal,
            "max_axiom_violation": axiom_violation,
            "tolerance": TRANSPORT_TOL,
        }),
    ))
}

fn metric_consistency() -> Result<CheckOutcome> {
    let instances = 20;
    let mut mismatches = 0;
    let mut separated = 0;
    for i in 0..instances {
        let (ns, na) = (2 + i % 3, 2 + i % 2);
        let base = random_mdp(4000 + i as u64, ns, na, 0.9);
        let (mdp, _) = mirrored_mdp(&base, 5000 + i as u64, true);
        let (h, _) = minimize_lax(&mdp, 0.0)?;
        let lax = lax_bisim_metric(&mdp, 1.0, 0.5, 1e-10)?;
        let states = lax_state_metric(&lax, na);
        if states.zero_classes() != h.state_map() {
            mismatches += 1;
        }
        let strict = bisim_metric(&mdp, 1.0, 0.5, 1e-10)?;
        let n = mdp.n_states();
        let found = (0..n).any(|s| (s + 1..n).any(|t| states.get(s, t) == 0.0 && strict.get(s, t) > 0.0));
        if found {
            separated += 1;
        }
    }
    let passed = mismatches == 0 && separated > 0;
    Ok(outcome(
        Suite::Finite,
        "metric_consistency",
        passed,
        format!(
            "{instances} mirrored MDPs: {mismatches} mismatches between lax-metric zeros and minimised blocks; strict metric separates lax-equivalent states on {separated}"
        ),
        json!({
            "instances": instances,
            "partition_mismatches": mismatches,
            "instances_with_strict_lax_separation": separated,
        }),
    ))
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    })
}

fn random_linear_hom(seed: u64, n: usize, m: usize) -> Result<LinearHomomorphism> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_invertible(&mut rng, n);
    let g = random_invertible(&mut rng, m);
    Ok(LinearHomomorphism::new(f, g)?)
}

fn optimal_gain(env: &LinearQuadratic, gamma: f64) -> Result<DMatrix<f64>> {
    let gain = lqr_solve(env, gamma)?.gain.expect("optimal values carry their gain");
    Ok(-gain)
}

/// The image of `env` under `hom` with its state cost scaled, so that costs are no longer
/// invariant under the map. Used by the negative control.
fn corrupted_image(env: &LinearQuadratic, hom: &LinearHomomorphism) -> Result<LinearQuadratic> {
    let mut image = hom.image(env)?;
    image.q *= LQR_COST_CORRUPTION;
    Ok(image)
}

fn lqr_value_equivalence(negative_control: bool) -> Result<CheckOutcome> {
    let (instances, n_probes, gamma) = (5, 100, 0.95);
    let mut worst = 0.0_f64;
    for i in 0..instances {
        let env = LinearQuadratic::random_instance(300 + i, 2, 2, 0.0, 1.0);
        let hom = random_linear_hom(400 + i, 2, 2)?;
        let theta = optimal_gain(&env, gamma)?;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
        let probes: Vec<_> = (0..n_probes).map(|_| normal_vector(&mut rng, 2)).collect();
        let gap = if negative_control {
            let value = linear_policy_value(&env, &theta, gamma)?;
            let value_bar = linear_policy_value(&corrupted_image(&env, &hom)?, &hom.abstract_gain(&theta), gamma)?;
            probes
                .iter()
                .map(|s| (value.v(s) - value_bar.v(&(&hom.f * s))).abs())
                .fold(0.0, f64::max)
        } else {
            check_value_equivalence_lqr(&env, &hom, &theta, gamma, &probes)?.max_abs_gap
        };
        worst = worst.max(gap);
    }
    Ok(outcome(
        Suite::Continuous,
        "lqr_value_equivalence",
        worst <= VALUE_TOL,
        format!("{instances} noise-free LQR instances x {n_probes} probes: max |V - V_bar o f| {worst:.2e}"),
        json!({ "instances": instances, "probes_per_instance": n_probes, "max_abs_gap": worst, "tolerance": VALUE_TOL }),
    ))
}

fn lqr_optimal_value_equivalence(negative_control: bool) -> Result<CheckOutcome> {
    let (instances, n_probes, gamma) = (5, 100, 0.95);
    let (mut q_gap, mut v_gap) = (0.0_f64, 0.0_f64);
    for i in 0..instances {
        let env = LinearQuadratic::random_instance(600 + i, 2, 2, 0.05, 1.0);
        let hom = random_linear_hom(700 + i, 2, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(800 + i);
        let probes: Vec<_> = (0..n_probes)
            .map(|_| (normal_vector(&mut rng, 2), normal_vector(&mut rng, 2)))
            .collect();
        if negative_control {
            let image = corrupted_image(&env, &hom)?;
            let (opt, opt_bar) = (lqr_solve(&env, gamma)?, lqr_solve(&image, gamma)?);
            for (s, a) in &probes {
                let (s_bar, a_bar) = (&hom.f * s, &hom.g * a);
                q_gap = q_gap.max((opt.q(&env, s, a) - opt_bar.q(&image, &s_bar, &a_bar)).abs());
                v_gap = v_gap.max((opt.v(s) - opt_bar.v(&s_bar)).abs());
            }
        } else {
            let report = check_optimal_value_equivalence(&env, &hom, gamma, &probes)?;
            q_gap = q_gap.max(report.max_q_gap);
            v_gap = v_gap.max(report.max_v_gap);
        }
    }
    Ok(outcome(
        Suite::Continuous,
        "lqr_optimal_value_equivalence",
        q_gap <= VALUE_TOL && v_gap <= VALUE_TOL,
        format!("{instances} LQR instances x {n_probes} probes: max Q* gap {q_gap:.2e}, max V* gap {v_gap:.2e}"),
        json!({ "instances": instances, "probes_per_instance": n_probes, "max_q_gap": q_gap, "max_v_gap": v_gap, "tolerance": VALUE_TOL }),
    ))
}

/// Rotates the pendulum angle by a quarter turn and keeps actions. Gravity does not commute
/// with a rotation, so this is not a homomorphism; it is the negative control for the
/// reflection.
struct QuarterTurn;

impl AnalyticHomomorphism for QuarterTurn {
    fn map_state(&self, s: &[f64]) -> Vec<f64> {
        vec![wrap_angle(s[0] + std::f64::consts::FRAC_PI_2), s[1]]
    }

    fn map_action(&self, _s: &[f64], a: &[f64]) -> Vec<f64> {
        a.to_vec()
    }

    fn action_jacobian(&self, _s: &[f64], a: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(a.len(), a.len())
    }

    fn map_noise(&self, z: &[f64]) -> Vec<f64> {
        z.to_vec()
    }
}

fn pendulum_value_equivalence(negative_control: bool) -> Result<CheckOutcome> {
    let env = Pendulum {
        action_noise_std: 0.3,
        ..Pendulum::default()
    };
    let policy = |s: &[f64]| odd_pendulum_policy(s);
    let (hom, label): (&dyn AnalyticHomomorphism, &str) = if negative_control {
        (&QuarterTurn, "quarter-turn rotation")
    } else {
        (&PendulumMap::Flip, "reflection symmetry")
    };
    // Both action maps are involutions, so g⁻¹ = g.
    let lifted = |s: &[f64]| hom.map_action(s, &[policy(&hom.map_state(s))])[0];
    let report = check_value_equivalence_mc(&env, hom, &lifted, &policy, 20, 20, 200, 0.99, 13)?;
    Ok(outcome(
        Suite::Continuous,
        "pendulum_value_equivalence",
        report.within_stderrs(MC_STDERRS),
        format!(
            "{label}, {} probes x {} paired rollouts: max gap {:.2e} = {:.2} standard errors",
            report.n_probes, report.n_rollouts, report.max_abs_gap, report.max_gap_in_stderrs
        ),
        json!({ "report": report, "max_stderrs": MC_STDERRS }),
    ))
}

fn gradient_equivalence() -> Result<CheckOutcome> {
    let (instances, gamma) = (20, 0.9);
    let (mut autodiff, mut fd) = (0.0_f64, 0.0_f64);
    let mut worst_condition = 0.0_f64;
    for i in 0..instances {
        let env = LinearQuadratic::random_instance(900 + i, 2, 2, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let hom = LinearHomomorphism::new(random_invertible(&mut rng, 2), random_invertible(&mut rng, 2))?;
        let policy = PolicyNet::random_tanh(&[2, 16, 2], &mut rng);
        let probes: Vec<_> = (0..5).map(|_| normal_vector(&mut rng, 2)).collect();
        let a = check_gradient_equivalence(&env, &hom, &policy, &probes, QGradientRoute::Autodiff, gamma, 1e-5)?;
        let f = check_gradient_equivalence(&env, &hom, &policy, &probes, QGradientRoute::FiniteDifference, gamma, 1e-5)?;
        autodiff = autodiff.max(a.max_rel_error);
        fd = fd.max(f.max_rel_error);
        worst_condition = worst_condition.max(a.action_jacobian_condition);
    }
    Ok(outcome(
        Suite::Gradients,
        "gradient_equivalence",
        autodiff <= AUTODIFF_GRAD_TOL && fd <= FD_GRAD_TOL,
        format!("{instances} LQR instances with MLP policies: max relative error {autodiff:.2e} (autodiff), {fd:.2e} (finite differences)"),
        json!({
            "instances": instances,
            "max_rel_error_autodiff": autodiff,
            "max_rel_error_finite_difference": fd,
            "tolerance_autodiff": AUTODIFF_GRAD_TOL,
            "tolerance_finite_difference": FD_GRAD_TOL,
            "max_action_jacobian_condition": worst_condition,
        }),
    ))
}

/// The instance, coordinate change and gain shared by the estimator check and its control.
pub fn hpg_instance() -> Result<(LinearQuadratic, LinearHomomorphism, DMatrix<f64>)> {
    let env = LinearQuadratic::random_instance(100, 2, 2, 0.05, 0.1);
    let hom = random_linear_hom(0, 2, 2)?;
    let theta = optimal_gain(&env, 0.9)? * 0.5;
    Ok((env, hom, theta))
}

fn hpg_estimator(negative_control: bool) -> Result<CheckOutcome> {
    let (env, hom, theta) = hpg_instance()?;
    let (gamma, samples, seed) = (0.9, 100_000, 17);
    let main_corruption = if negative_control { HPG_CORRUPTION } else { 0.0 };
    let report = check_hpg_estimator(&env, &hom, &theta, gamma, samples, seed, main_corruption)?;
    let control = check_hpg_estimator(&env, &hom, &theta, gamma, samples, seed, HPG_CORRUPTION)?;
    let passed = report.cosine_similarity >= HPG_COSINE && control.cosine_similarity < HPG_COSINE;
    Ok(outcome(
        Suite::Gradients,
        "hpg_estimator",
        passed,
        format!(
            "{samples} visitation samples: cosine {:.5} (needs >= {HPG_COSINE}); broken reward invariance gives {:.5} (needs < {HPG_COSINE})",
            report.cosine_similarity, control.cosine_similarity
        ),
        json!({
            "report": report,
            "negative_control": control,
            "corruption": HPG_CORRUPTION,
            "threshold": HPG_COSINE,
            "corrupted_main_check": negative_control,
        }),
    ))
}

fn primitive_gradients() -> CheckOutcome {
    let seeds = 100;
    let mut worst: (f64, &str) = (0.0, "");
    for seed in 0..seeds {
        for (name, err) in homdp_autodiff::gradcheck::primitive_suite(seed) {
            if !(err <= worst.0) {
                worst = (err, name);
            }
        }
    }
    outcome(
        Suite::Gradients,
        "primitive_gradients",
        worst.0 <= PRIMITIVE_TOL,
        format!("{seeds} random shapes per primitive: max relative error {:.2e} ({})", worst.0, worst.1),
        json!({ "seeds": seeds, "max_rel_error": worst.0, "worst_primitive": worst.1, "tolerance": PRIMITIVE_TOL }),
    )
}
