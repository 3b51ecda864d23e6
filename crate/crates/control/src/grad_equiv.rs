//! Numerical checks that values and deterministic policy gradients agree between a
//! continuous MDP and its homomorphic image.
//!
//! The linear-quadratic checks compare closed-form quantities on both sides; the pendulum
//! check uses Monte Carlo returns with paired noise.

use homdp_autodiff::{Gradients, Tape, Tensor, Var};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::envs::lqr::invert;
use crate::envs::{linear_policy_value, lqr_solve, pendulum_step, ContinuousEnv, LinearQuadratic, Pendulum};
use crate::error::{ControlError, Result};

/// Largest condition number of `∇_a g_s(a)` accepted before a probe is declared singular.
pub const MAX_JACOBIAN_CONDITION: f64 = 1e12;

/// Horizon `T` with `γ^T ≤ mass`.
pub fn horizon_for(gamma: f64, mass: f64) -> usize {
    (mass.ln() / gamma.ln()).ceil().max(1.0) as usize
}

/// State and action maps of a continuous homomorphism `(f, g_s)`.
pub trait AnalyticHomomorphism {
    fn map_state(&self, s: &[f64]) -> Vec<f64>;
    fn map_action(&self, s: &[f64], a: &[f64]) -> Vec<f64>;
    /// `∇_a g_s(a)`.
    fn action_jacobian(&self, s: &[f64], a: &[f64]) -> DMatrix<f64>;
    /// The noise realisation of the image system paired with `z` of the actual one.
    fn map_noise(&self, z: &[f64]) -> Vec<f64>;
}

/// Condition number of a square matrix (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    if sv.min() == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / sv.min()
    }
}

/// `f(s) = F s`, `g_s(a) = G a` between a linear-quadratic system and its reparameterisation.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHomomorphism {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub f_inv: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl LinearHomomorphism {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let f_inv = invert(&f, "F")?;
        let g_inv = invert(&g, "G")?;
        Ok(Self { f, g, f_inv, g_inv })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::identity(m, m)).expect("identity is invertible")
    }

    /// Image system `(F A F⁻¹, F B G⁻¹, F⁻ᵀ Q F⁻¹, G⁻ᵀ R G⁻¹, F Σ Fᵀ)`.
    pub fn image(&self, env: &LinearQuadratic) -> Result<LinearQuadratic> {
        env.reparameterize(&self.f, &self.g)
    }

    /// The abstract linear policy `Θ̄ = G Θ F⁻¹` corresponding to `a = Θ s`.
    pub fn abstract_gain(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g * theta * &self.f_inv
    }

    fn check_jacobian(&self) -> Result<f64> {
        let cond = condition_number(&self.g);
        if cond.is_finite() && cond <= MAX_JACOBIAN_CONDITION {
            Ok(cond)
        } else {
            Err(ControlError::SingularJacobian(format!("condition number of G is {cond:.3e}")))
        }
    }
}

impl AnalyticHomomorphism for LinearHomomorphism {
    fn map_state(&self, s: &[f64]) -> Vec<f64> {
        (&self.f * DVector::from_column_slice(s)).as_slice().to_vec()
    }

    fn map_action(&self, _s: &[f64], a: &[f64]) -> Vec<f64> {
        (&self.g * DVector::from_column_slice(a)).as_slice().to_vec()
    }

    fn action_jacobian(&self, _s: &[f64], _a: &[f64]) -> DMatrix<f64> {
        self.g.clone()
    }

    /// Dynamics noise lives in state coordinates, so it is pushed forward by `F`.
    fn map_noise(&self, z: &[f64]) -> Vec<f64> {
        self.map_state(z)
    }
}

/// Maps of the pendulum onto itself: the identity or the reflection `(θ, θ̇, a) → (−θ, −θ̇, −a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PendulumMap {
    Identity,
    Flip,
}

impl PendulumMap {
    fn sign(self) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Flip => -1.0,
        }
    }
}

impl AnalyticHomomorphism for PendulumMap {
    fn map_state(&self, s: &[f64]) -> Vec<f64> {
        s.iter().map(|x| self.sign() * x).collect()
    }

    fn map_action(&self, _s: &[f64], a: &[f64]) -> Vec<f64> {
        a.iter().map(|x| self.sign() * x).collect()
    }

    fn action_jacobian(&self, _s: &[f64], a: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(a.len(), a.len()) * self.sign()
    }

    /// Pendulum noise perturbs the action, so it transforms like one.
    fn map_noise(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|x| self.sign() * x).collect()
    }
}

/// A pendulum controller that commutes with the reflection: `π(−s) = −π(s)`.
pub fn odd_pendulum_policy(state: &[f64]) -> f64 {
    (-1.5 * state[0].sin() - 0.4 * state[1]).tanh()
}

/// Deterministic policy used in the gradient checks.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyNet {
    /// `a = Θ s`, stored as `W = Θᵀ` so a row state maps to `s · W`.
    Linear(Tensor),
    /// Fully connected with tanh after every layer; `(W, b)` per layer.
    Tanh(Vec<(Tensor, Tensor)>),
}

impl PolicyNet {
    pub fn linear(theta: &DMatrix<f64>) -> Self {
        Self::Linear(to_tensor(&theta.transpose()))
    }

    /// Gaussian weights with standard deviation `1/√fan_in` and biases drawn as `0.1·N(0, 1)`.
    pub fn random_tanh(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                let weight = (0..w[0] * w[1]).map(|_| scale * normal(rng)).collect();
                let bias = (0..w[1]).map(|_| 0.1 * normal(rng)).collect();
                (
                    Tensor::new(w[0], w[1], weight).expect("sized"),
                    Tensor::new(1, w[1], bias).expect("sized"),
                )
            })
            .collect();
        Self::Tanh(layers)
    }

    /// `Θ` of a linear policy.
    pub fn theta(&self) -> Option<DMatrix<f64>> {
        match self {
            Self::Linear(w) => Some(from_tensor(w).transpose()),
            Self::Tanh(_) => None,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Self::Linear(w) => w.data.len(),
            Self::Tanh(layers) => layers.iter().map(|(w, b)| w.data.len() + b.data.len()).sum(),
        }
    }

    pub fn act(&self, s: &[f64]) -> Vec<f64> {
        let tape = Tape::new();
        let bound = self.bind(&tape, false);
        bound.forward(&tape.constant(Tensor::row(s))).expect("policy shapes").value().data
    }

    fn bind(&self, tape: &Tape, trainable: bool) -> BoundPolicy {
        let wrap = |t: &Tensor| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) };
        match self {
            Self::Linear(w) => BoundPolicy {
                params: vec![wrap(w)],
                tanh: false,
            },
            Self::Tanh(layers) => BoundPolicy {
                params: layers.iter().flat_map(|(w, b)| [wrap(w), wrap(b)]).collect(),
                tanh: true,
            },
        }
    }
}

struct BoundPolicy {
    params: Vec<Var>,
    tanh: bool,
}

impl BoundPolicy {
    fn forward(&self, x: &Var) -> Result<Var> {
        if !self.tanh {
            return Ok(x.matmul(&self.params[0])?);
        }
        let mut h = x.clone();
        for pair in self.params.chunks(2) {
            h = h.matmul(&pair[0])?.add(&pair[1])?.tanh();
        }
        Ok(h)
    }

    fn flat_grad(&self, grads: &Gradients) -> Vec<f64> {
        self.params.iter().flat_map(|p| grads.wrt(p).data).collect()
    }
}

/// A policy on the actual system, or its image `π̄(s̄) = G π(F⁻¹ s̄)` on the abstract one.
#[derive(Clone, Copy)]
struct PolicyView<'a> {
    net: &'a PolicyNet,
    hom: Option<&'a LinearHomomorphism>,
}

impl PolicyView<'_> {
    fn forward(&self, bound: &BoundPolicy, x: &Var) -> Result<Var> {
        match self.hom {
            None => bound.forward(x),
            Some(h) => {
                let tape = x.tape();
                let pre = x.matmul(&tape.constant(to_tensor(&h.f_inv.transpose())))?;
                Ok(bound.forward(&pre)?.matmul(&tape.constant(to_tensor(&h.g.transpose())))?)
            }
        }
    }

    fn act(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        let tape = Tape::new();
        let bound = self.net.bind(&tape, false);
        let out = self.forward(&bound, &tape.constant(Tensor::row(s.as_slice())))?;
        Ok(DVector::from_vec(out.value().data))
    }
}

/// How `∇_a Q^π(s, a)` is obtained in [`check_gradient_equivalence`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QGradientRoute {
    /// Closed form from the policy's quadratic value; linear policies only.
    ClosedForm,
    /// Reverse-mode differentiation through a noise-free rollout truncated at `γ^T < 1e-12`.
    Autodiff,
    /// Central differences of the same truncated rollout return.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientReport {
    pub route: QGradientRoute,
    pub n_probes: usize,
    pub n_params: usize,
    /// Max over probes of `‖L − R‖ / max(‖L‖, ‖R‖)` between the two policy gradients.
    pub max_rel_error: f64,
    /// Max over probes of the relative gap between `∇_ā Q̄ · ∇_a g` and `∇_a Q`.
    pub max_cancellation_error: f64,
    pub action_jacobian_condition: f64,
}

fn to_tensor(m: &DMatrix<f64>) -> Tensor {
    let (r, c) = m.shape();
    Tensor::new(r, c, (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()).expect("sized")
}

fn from_tensor(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows, t.cols, &t.data)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn tape_reward(s: &Var, a: &Var, q: &Var, r: &Var) -> Result<Var> {
    let state_cost = s.matmul(q)?.mul(s)?.sum();
    let action_cost = a.matmul(r)?.mul(a)?.sum();
    Ok(state_cost.add(&action_cost)?.neg())
}

/// `∇_a` of the truncated noise-free return `r(s, a) + Σ_{t=1}^{T} γ^t r(s_t, π(s_t))`.
fn rollout_gradient_autodiff(
    env: &LinearQuadratic,
    policy: PolicyView<'_>,
    s: &DVector<f64>,
    a: &DVector<f64>,
    gamma: f64,
    horizon: usize,
) -> Result<DVector<f64>> {
    let tape = Tape::new();
    let bound = policy.net.bind(&tape, false);
    let at = tape.constant(to_tensor(&env.a.transpose()));
    let bt = tape.constant(to_tensor(&env.b.transpose()));
    let q = tape.constant(to_tensor(&env.q));
    let r = tape.constant(to_tensor(&env.r));
    let s0 = tape.constant(Tensor::row(s.as_slice()));
    let a0 = tape.leaf(Tensor::row(a.as_slice()));
    let mut total = tape_reward(&s0, &a0, &q, &r)?;
    let mut state = s0.matmul(&at)?.add(&a0.matmul(&bt)?)?;
    let mut discount = gamma;
    for _ in 0..horizon {
        let action = policy.forward(&bound, &state)?;
        total = total.add(&tape_reward(&state, &action, &q, &r)?.scale(discount))?;
        state = state.matmul(&at)?.add(&action.matmul(&bt)?)?;
        discount *= gamma;
    }
    let grads = tape.backward(&total)?;
    Ok(DVector::from_vec(grads.wrt(&a0).data))
}

fn rollout_return(
    env: &LinearQuadratic,
    policy: PolicyView<'_>,
    s: &DVector<f64>,
    a: &DVector<f64>,
    gamma: f64,
    horizon: usize,
) -> Result<f64> {
    let mut total = env.reward(s, a);
    let mut state = env.mean_next(s, a);
    let mut discount = gamma;
    for _ in 0..horizon {
        let action = policy.act(&state)?;
        total += discount * env.reward(&state, &action);
        state = env.mean_next(&state, &action);
        discount *= gamma;
    }
    Ok(total)
}

fn rollout_gradient_fd(
    env: &LinearQuadratic,
    policy: PolicyView<'_>,
    s: &DVector<f64>,
    a: &DVector<f64>,
    gamma: f64,
    horizon: usize,
    h: f64,
) -> Result<DVector<f64>> {
    let mut grad = DVector::zeros(a.len());
    for k in 0..a.len() {
        let mut plus = a.clone();
        plus[k] += h;
        let mut minus = a.clone();
        minus[k] -= h;
        grad[k] = (rollout_return(env, policy, s, &plus, gamma, horizon)?
            - rollout_return(env, policy, s, &minus, gamma, horizon)?)
            / (2.0 * h);
    }
    Ok(grad)
}

/// Gradient of `π_θ(x) · seed` with respect to θ, where `x` is the (possibly abstract) input.
fn policy_vjp(policy: PolicyView<'_>, x: &DVector<f64>, seed: &DVector<f64>) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let bound = policy.net.bind(&tape, true);
    let out = policy.forward(&bound, &tape.constant(Tensor::row(x.as_slice())))?;
    let grads = tape.backward_with(&out, Tensor::row(seed.as_slice()))?;
    Ok(bound.flat_grad(&grads))
}

/// Compares `∇_θ π↑_θ(s)ᵀ ∇_a Q^{π↑}(s, π↑(s))` on the actual system with
/// `∇_θ π̄_θ(s̄)ᵀ ∇_ā Q̄^{π̄}(s̄, π̄(s̄))` on the image, `s̄ = F s`, `π̄_θ(s̄) = G π↑_θ(F⁻¹ s̄)`.
///
/// Rollout routes use the noise-free dynamics; actions are not clipped.
pub fn check_gradient_equivalence(
    env: &LinearQuadratic,
    hom: &LinearHomomorphism,
    policy: &PolicyNet,
    probes: &[DVector<f64>],
    route: QGradientRoute,
    gamma: f64,
    fd_step: f64,
) -> Result<GradientReport> {
    if !(fd_step > 0.0) {
        return Err(ControlError::InvalidConfig(format!("fd_step must be positive, got {fd_step}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ControlError::InvalidConfig(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let condition = hom.check_jacobian()?;
    let image = hom.image(env)?;
    let actual = PolicyView { net: policy, hom: None };
    let abstracted = PolicyView { net: policy, hom: Some(hom) };
    let horizon = horizon_for(gamma, 1e-12);

    let closed = match route {
        QGradientRoute::ClosedForm => {
            let theta = policy.theta().ok_or_else(|| {
                ControlError::InvalidConfig("the closed-form route needs a linear policy".into())
            })?;
            Some((
                linear_policy_value(env, &theta, gamma)?,
                linear_policy_value(&image, &hom.abstract_gain(&theta), gamma)?,
            ))
        }
        _ => None,
    };
    let q_gradient = |system: &LinearQuadratic, view: PolicyView<'_>, s: &DVector<f64>, a: &DVector<f64>, abs: bool| {
        match route {
            QGradientRoute::ClosedForm => {
                let (v, v_bar) = closed.as_ref().expect("computed above");
                Ok(if abs { v_bar } else { v }.q_action_gradient(system, s, a))
            }
            QGradientRoute::Autodiff => rollout_gradient_autodiff(system, view, s, a, gamma, horizon),
            QGradientRoute::FiniteDifference => rollout_gradient_fd(system, view, s, a, gamma, horizon, fd_step),
        }
    };

    let (mut max_rel, mut max_cancel) = (0.0_f64, 0.0_f64);
    for s in probes {
        let a = actual.act(s)?;
        let s_bar = &hom.f * s;
        let a_bar = abstracted.act(&s_bar)?;
        let c = q_gradient(env, actual, s, &a, false)?;
        let c_bar = q_gradient(&image, abstracted, &s_bar, &a_bar, true)?;
        let lhs = policy_vjp(actual, s, &c)?;
        let rhs = policy_vjp(abstracted, &s_bar, &c_bar)?;
        max_rel = max_rel.max(relative_gap(&lhs, &rhs));
        let pulled_back = hom.g.transpose() * &c_bar;
        max_cancel = max_cancel.max(relative_gap(pulled_back.as_slice(), c.as_slice()));
    }
    Ok(GradientReport {
        route,
        n_probes: probes.len(),
        n_params: policy.n_params(),
        max_rel_error: max_rel,
        max_cancellation_error: max_cancel,
        action_jacobian_condition: condition,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HpgReport {
    pub n_samples: usize,
    pub horizon: usize,
    pub cosine_similarity: f64,
    pub rel_norm_gap: f64,
    pub dpg_norm: f64,
    pub hpg_norm: f64,
}

/// Estimates `∇_Θ J` for the linear policy `a = Θ s` twice from shared random numbers:
/// by DPG on the actual system and by HPG on the image. States come from the discounted
/// visitation distribution, sampled with a geometric time truncated at `γ^T ≤ 1e-4`;
/// `s̄₀ = F s₀` and the image noise is `F ε`. A nonzero `reward_corruption` δ breaks reward
/// invariance for a negative control: the image reward becomes `R̄(f(s), g(a)) = R(s, a) − δ a₁²`.
pub fn check_hpg_estimator(
    env: &LinearQuadratic,
    hom: &LinearHomomorphism,
    theta: &DMatrix<f64>,
    gamma: f64,
    n_samples: usize,
    seed: u64,
    reward_corruption: f64,
) -> Result<HpgReport> {
    if n_samples == 0 {
        return Err(ControlError::InvalidConfig("n_samples must be positive".into()));
    }
    let mut image = hom.image(env)?;
    let first_row = hom.g_inv.rows(0, 1).into_owned();
    image.r += first_row.transpose() * first_row * reward_corruption;
    let theta_bar = hom.abstract_gain(theta);
    let value = linear_policy_value(env, theta, gamma)?;
    let value_bar = linear_policy_value(&image, &theta_bar, gamma)?;
    let closed = &env.a + &env.b * theta;
    let closed_bar = &image.a + &image.b * &theta_bar;
    let noise = env.noise_factor();
    let horizon = horizon_for(gamma, 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = env.n();
    let mut dpg = DMatrix::zeros(env.m(), n);
    let mut hpg = DMatrix::zeros(env.m(), n);
    for _ in 0..n_samples {
        let mut s = DVector::from_fn(n, |_, _| env.init_scale * normal(&mut rng));
        let mut s_bar = &hom.f * &s;
        let t = loop {
            let u: f64 = rng.random();
            let t = ((1.0 - u).ln() / gamma.ln()).floor();
            if t < horizon as f64 {
                break t as usize;
            }
        };
        for _ in 0..t {
            let eps = &noise * DVector::from_fn(n, |_, _| normal(&mut rng));
            s_bar = &closed_bar * &s_bar + &hom.f * &eps;
            s = &closed * &s + eps;
        }
        let c = value.q_action_gradient(env, &s, &(theta * &s));
        dpg += &c * s.transpose();
        let c_bar = value_bar.q_action_gradient(&image, &s_bar, &(&theta_bar * &s_bar));
        hpg += hom.g.transpose() * c_bar * (&hom.f_inv * &s_bar).transpose();
    }
    dpg /= n_samples as f64;
    hpg /= n_samples as f64;
    let (dn, hn) = (dpg.norm(), hpg.norm());
    let cosine = if dn == 0.0 || hn == 0.0 { 0.0 } else { dpg.dot(&hpg) / (dn * hn) };
    Ok(HpgReport {
        n_samples,
        horizon,
        cosine_similarity: cosine,
        rel_norm_gap: relative_gap(dpg.as_slice(), hpg.as_slice()),
        dpg_norm: dn,
        hpg_norm: hn,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueReport {
    pub n_probes: usize,
    /// Rollouts per probe; 0 for analytic values.
    pub n_rollouts: usize,
    pub max_abs_gap: f64,
    /// Standard error of the value estimate at the probe with the largest gap relative to
    /// its standard error; 0 for analytic values.
    pub stderr: f64,
    /// Largest `gap / stderr` over probes (0 when every gap is 0).
    pub max_gap_in_stderrs: f64,
}

impl ValueReport {
    /// `gap ≤ k·stderr` at every probe, with `1e-12` slack for exact ties.
    pub fn within_stderrs(&self, k: f64) -> bool {
        self.max_gap_in_stderrs <= k || self.max_abs_gap <= 1e-12
    }
}

/// `|V^{π↑}(s) − V̄^{π̄}(F s)|` from closed-form values of `a = Θ s` and `ā = G Θ F⁻¹ s̄`.
pub fn check_value_equivalence_lqr(
    env: &LinearQuadratic,
    hom: &LinearHomomorphism,
    theta: &DMatrix<f64>,
    gamma: f64,
    probes: &[DVector<f64>],
) -> Result<ValueReport> {
    let image = hom.image(env)?;
    let value = linear_policy_value(env, theta, gamma)?;
    let value_bar = linear_policy_value(&image, &hom.abstract_gain(theta), gamma)?;
    let gap = probes
        .iter()
        .map(|s| (value.v(s) - value_bar.v(&(&hom.f * s))).abs())
        .fold(0.0, f64::max);
    Ok(ValueReport {
        n_probes: probes.len(),
        n_rollouts: 0,
        max_abs_gap: gap,
        stderr: 0.0,
        max_gap_in_stderrs: 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalValueReport {
    pub n_probes: usize,
    pub max_q_gap: f64,
    pub max_v_gap: f64,
}

/// `|Q*(s, a) − Q̄*(F s, G a)|` and `|V*(s) − V̄*(F s)|` with both optima from the Riccati solver.
pub fn check_optimal_value_equivalence(
    env: &LinearQuadratic,
    hom: &LinearHomomorphism,
    gamma: f64,
    probes: &[(DVector<f64>, DVector<f64>)],
) -> Result<OptimalValueReport> {
    let image = hom.image(env)?;
    let opt = lqr_solve(env, gamma)?;
    let opt_bar = lqr_solve(&image, gamma)?;
    let (mut q_gap, mut v_gap) = (0.0_f64, 0.0_f64);
    for (s, a) in probes {
        let (s_bar, a_bar) = (&hom.f * s, &hom.g * a);
        q_gap = q_gap.max((opt.q(env, s, a) - opt_bar.q(&image, &s_bar, &a_bar)).abs());
        v_gap = v_gap.max((opt.v(s) - opt_bar.v(&s_bar)).abs());
    }
    Ok(OptimalValueReport {
        n_probes: probes.len(),
        max_q_gap: q_gap,
        max_v_gap: v_gap,
    })
}

/// Paired Monte Carlo comparison of `V^{π↑}(s)` on the pendulum with `V^{π̄}(f(s))` on its
/// image under `hom` (the pendulum again). Both rollouts see the same noise draw `z`, mapped
/// through `hom` on the image side. Start states come from `env.reset`.
#[allow(clippy::too_many_arguments)]
pub fn check_value_equivalence_mc(
    env: &Pendulum,
    hom: &dyn AnalyticHomomorphism,
    lifted: &dyn Fn(&[f64]) -> f64,
    abstract_policy: &dyn Fn(&[f64]) -> f64,
    n_probes: usize,
    n_rollouts: usize,
    horizon: usize,
    gamma: f64,
    seed: u64,
) -> Result<ValueReport> {
    if n_rollouts < 2 {
        return Err(ControlError::InvalidConfig("at least two rollouts per probe are needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValueReport {
        n_probes,
        n_rollouts,
        max_abs_gap: 0.0,
        stderr: 0.0,
        max_gap_in_stderrs: 0.0,
    };
    let sigma = env.action_noise_std;
    for _ in 0..n_probes {
        let start = env.reset(&mut rng);
        let start_bar = hom.map_state(&start);
        let mut returns = Vec::with_capacity(n_rollouts);
        let mut returns_bar = Vec::with_capacity(n_rollouts);
        for _ in 0..n_rollouts {
            let (mut s, mut s_bar) = ([start[0], start[1]], [start_bar[0], start_bar[1]]);
            let (mut total, mut total_bar, mut discount) = (0.0, 0.0, 1.0);
            for _ in 0..horizon {
                let z = if sigma > 0.0 { normal(&mut rng) } else { 0.0 };
                let z_bar = hom.map_noise(&[z])[0];
                let (next, r) = pendulum_step(s, lifted(&s) + sigma * z);
                let (next_bar, r_bar) = pendulum_step(s_bar, abstract_policy(&s_bar) + sigma * z_bar);
                total += discount * r;
                total_bar += discount * r_bar;
                discount *= gamma;
                (s, s_bar) = (next, next_bar);
            }
            returns.push(total);
            returns_bar.push(total_bar);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let (m, m_bar) = (mean(&returns), mean(&returns_bar));
        let k = n_rollouts as f64;
        let stderr = (var(&returns, m) / k + var(&returns_bar, m_bar) / k).sqrt();
        let gap = (m - m_bar).abs();
        report.max_abs_gap = report.max_abs_gap.max(gap);
        let ratio = if gap == 0.0 {
            0.0
        } else if stderr == 0.0 {
            f64::INFINITY
        } else {
            gap / stderr
        };
        if ratio >= report.max_gap_in_stderrs {
            report.max_gap_in_stderrs = ratio;
            report.stderr = stderr;
        }
    }
    Ok(report)
}
