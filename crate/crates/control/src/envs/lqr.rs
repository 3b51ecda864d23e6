//! Discounted linear-quadratic control with closed-form values.
//!
//! Dynamics `s' = A s + B a + ε` with `ε ~ N(0, Σ)` and reward `−(sᵀQs + aᵀRa)`. Values of
//! linear policies and of the optimal policy are quadratics `V(s) = −sᵀPs − c`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{clip_action, ContinuousEnv};
use crate::error::{ControlError, Result};

/// Relative Riccati fixed-point residual accepted from [`lqr_solve`].
pub const RICCATI_RESIDUAL_TOL: f64 = 1e-10;
const RICCATI_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearQuadratic {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    /// Standard deviation of each coordinate of the initial state.
    pub init_scale: f64,
    pub episode_length: usize,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Square matrix with standard normal entries, redrawn until its condition number is ≤ 10.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = gaussian_matrix(rng, n, n);
        let sv = m.clone().singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() <= 10.0 {
            return m;
        }
    }
}

impl LinearQuadratic {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        noise_std: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
            return Err(ControlError::ShapeMismatch(format!(
                "A {:?}, B {:?}, Q {:?}, R {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                r.shape()
            )));
        }
        Ok(Self {
            a,
            b,
            q,
            r,
            noise_cov: DMatrix::identity(n, n) * (noise_std * noise_std),
            init_scale: 1.0,
            episode_length: 200,
        })
    }

    /// Random system with `‖A‖₂ = 0.9`, Gaussian `B`, and `Q`, `R` equal to a random Gram
    /// matrix plus `0.5 I`; `R` is then multiplied by `r_scale`.
    pub fn random_instance(seed: u64, n: usize, m: usize, noise_std: f64, r_scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = gaussian_matrix(&mut rng, n, n);
        let norm = raw.clone().singular_values().max();
        let a = raw * (0.9 / norm);
        let b = gaussian_matrix(&mut rng, n, m) / (n as f64).sqrt();
        let x = gaussian_matrix(&mut rng, n, n);
        let q = x.transpose() * &x / n as f64 + DMatrix::identity(n, n) * 0.5;
        let y = gaussian_matrix(&mut rng, m, m);
        let r = (y.transpose() * &y / m as f64 + DMatrix::identity(m, m) * 0.5) * r_scale;
        Self::new(a, b, q, r, noise_std).expect("consistent shapes")
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        let n = self.n();
        self.noise_cov = DMatrix::identity(n, n) * (noise_std * noise_std);
        self
    }

    pub fn reward(&self, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        -((s.transpose() * &self.q * s)[0] + (a.transpose() * &self.r * a)[0])
    }

    /// Mean next state `A s + B a`.
    pub fn mean_next(&self, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        &self.a * s + &self.b * a
    }

    /// Cholesky factor of Σ (zero when there is no noise).
    pub fn noise_factor(&self) -> DMatrix<f64> {
        match self.noise_cov.clone().cholesky() {
            Some(c) => c.l(),
            None => DMatrix::zeros(self.n(), self.n()),
        }
    }

    /// The image system under `f(s) = F s`, `g(a) = G a`:
    /// `(F A F⁻¹, F B G⁻¹, F⁻ᵀ Q F⁻¹, G⁻ᵀ R G⁻¹, F Σ Fᵀ)`.
    pub fn reparameterize(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Self> {
        let f_inv = invert(f, "F")?;
        let g_inv = invert(g, "G")?;
        Ok(Self {
            a: f * &self.a * &f_inv,
            b: f * &self.b * &g_inv,
            q: f_inv.transpose() * &self.q * &f_inv,
            r: g_inv.transpose() * &self.r * &g_inv,
            noise_cov: f * &self.noise_cov * f.transpose(),
            init_scale: self.init_scale,
            episode_length: self.episode_length,
        })
    }
}

pub(crate) fn invert(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(ControlError::ShapeMismatch(format!("{name} is not square")));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| ControlError::SingularJacobian(format!("{name} is not invertible")))
}

impl ContinuousEnv for LinearQuadratic {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn observation_dim(&self) -> usize {
        self.n()
    }

    fn action_dim(&self) -> usize {
        self.m()
    }

    fn episode_length(&self) -> usize {
        self.episode_length
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.n())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                self.init_scale * z
            })
            .collect()
    }

    fn step(&self, state: &[f64], action: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let s = DVector::from_column_slice(state);
        let a = DVector::from_vec(clip_action(action));
        let z = DVector::from_fn(self.n(), |_, _| StandardNormal.sample(rng));
        let next = self.mean_next(&s, &a) + self.noise_factor() * z;
        (next.as_slice().to_vec(), self.reward(&s, &a))
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }
}

/// `V(s) = −sᵀ P s − constant` together with the discount it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticValue {
    pub p: DMatrix<f64>,
    pub constant: f64,
    pub gamma: f64,
    /// Optimal gain (`a = −K s`) when this is the optimal value; `None` for a fixed policy.
    pub gain: Option<DMatrix<f64>>,
}

impl QuadraticValue {
    pub fn v(&self, s: &DVector<f64>) -> f64 {
        -(s.transpose() * &self.p * s)[0] - self.constant
    }

    /// `Q(s, a) = R(s, a) + γ E[V(A s + B a + ε)]`.
    pub fn q(&self, env: &LinearQuadratic, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let mean = env.mean_next(s, a);
        let expected_next = -(mean.transpose() * &self.p * &mean)[0]
            - (&self.p * &env.noise_cov).trace()
            - self.constant;
        env.reward(s, a) + self.gamma * expected_next
    }

    /// `∇_a Q(s, a) = −2 R a − 2 γ Bᵀ P (A s + B a)`.
    pub fn q_action_gradient(&self, env: &LinearQuadratic, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let mean = env.mean_next(s, a);
        -(&env.r * a) * 2.0 - env.b.transpose() * (&self.p * mean) * (2.0 * self.gamma)
    }
}

fn riccati_map(env: &LinearQuadratic, p: &DMatrix<f64>, gamma: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let bt_p = env.b.transpose() * p;
    let inner = &env.r + &bt_p * &env.b * gamma;
    let gain = inner.try_inverse()? * (&bt_p * &env.a) * gamma;
    let at_p = env.a.transpose() * p;
    let next = &env.q + (&at_p * &env.a) * gamma - (&at_p * &env.b) * &gain * gamma;
    Some(((&next + next.transpose()) * 0.5, gain))
}

/// Optimal value and gain from iterating the discounted Riccati map to its fixed point.
pub fn lqr_solve(env: &LinearQuadratic, gamma: f64) -> Result<QuadraticValue> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ControlError::InvalidConfig(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let mut p = env.q.clone();
    for _ in 0..RICCATI_MAX_ITERATIONS {
        let (next, _) = riccati_map(env, &p, gamma)
            .ok_or_else(|| ControlError::RiccatiDivergence("R + γ BᵀPB became singular".into()))?;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(ControlError::RiccatiDivergence("non-finite value matrix".into()));
        }
        let scale = next.amax().max(1.0);
        let change = (&next - &p).amax();
        p = next;
        if change <= 1e-15 * scale {
            break;
        }
    }
    let (fixed, gain) = riccati_map(env, &p, gamma)
        .ok_or_else(|| ControlError::RiccatiDivergence("R + γ BᵀPB became singular".into()))?;
    let residual = (&fixed - &p).amax();
    if residual > RICCATI_RESIDUAL_TOL * p.amax().max(1.0) {
        return Err(ControlError::RiccatiDivergence(format!(
            "fixed-point residual {residual:.3e} after {RICCATI_MAX_ITERATIONS} iterations"
        )));
    }
    let constant = gamma / (1.0 - gamma) * (&p * &env.noise_cov).trace();
    Ok(QuadraticValue {
        p,
        constant,
        gamma,
        gain: Some(gain),
    })
}

/// Value of the linear policy `a = Θ s` from the Lyapunov equation
/// `P = Q + ΘᵀRΘ + γ MᵀPM`, `M = A + BΘ`, solved exactly via its Kronecker form.
pub fn linear_policy_value(env: &LinearQuadratic, theta: &DMatrix<f64>, gamma: f64) -> Result<QuadraticValue> {
    let n = env.n();
    if theta.shape() != (env.m(), n) {
        return Err(ControlError::ShapeMismatch(format!(
            "policy matrix is {:?}, expected {:?}",
            theta.shape(),
            (env.m(), n)
        )));
    }
    let closed = &env.a + &env.b * theta;
    let radius = closed
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if gamma * radius * radius >= 1.0 {
        return Err(ControlError::RiccatiDivergence(format!(
            "closed loop has spectral radius {radius:.4}; the discounted value is unbounded"
        )));
    }
    let mt = closed.transpose();
    let system = DMatrix::identity(n * n, n * n) - mt.kronecker(&mt) * gamma;
    let rhs_matrix = &env.q + theta.transpose() * &env.r * theta;
    let rhs = DVector::from_column_slice(rhs_matrix.as_slice());
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ControlError::RiccatiDivergence("singular Lyapunov system".into()))?;
    let p = DMatrix::from_column_slice(n, n, solution.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let constant = gamma / (1.0 - gamma) * (&p * &env.noise_cov).trace();
    Ok(QuadraticValue {
        p,
        constant,
        gamma,
        gain: None,
    })
}
