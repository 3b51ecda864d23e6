//! Multi-layer perceptrons, Adam, and Polyak averaging.

use rand::Rng;

use crate::checkpoint::Checkpoint;
use crate::error::{AutodiffError, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::{matmul, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Fully connected network with ReLU hidden layers. Weights are stored `fan_in × fan_out`
/// so a batch `x` of shape `(n, fan_in)` maps to `x · W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
    output: OutputActivation,
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialisation; the last layer is additionally multiplied by
    /// `final_scale`.
    pub fn new(widths: &[usize], output: OutputActivation, final_scale: f64, rng: &mut impl Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let layers = widths.len() - 1;
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == layers { final_scale } else { 1.0 };
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n).map(|_| scale * rng.random_range(-bound..=bound)).collect()
            };
            weights.push(Tensor::new(fan_in, fan_out, draw(fan_in * fan_out)).expect("sized"));
            biases.push(Tensor::new(1, fan_out, draw(fan_out)).expect("sized"));
        }
        Self { weights, biases, output }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].rows
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("at least one layer").cols
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Parameters in `w0, b0, w1, b1, …` order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.n_layers())
            .flat_map(|l| [format!("layer{l}.weight"), format!("layer{l}.bias")])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    /// Binds the parameters as differentiable leaves.
    pub fn bind(&self, tape: &Tape) -> BoundMlp {
        self.bind_with(tape, |t| tape.leaf(t.clone()))
    }

    /// Binds the parameters as constants: the network is frozen but still differentiable in
    /// its input.
    pub fn bind_frozen(&self, tape: &Tape) -> BoundMlp {
        self.bind_with(tape, |t| tape.constant(t.clone()))
    }

    fn bind_with(&self, _tape: &Tape, f: impl Fn(&Tensor) -> Var) -> BoundMlp {
        BoundMlp {
            weights: self.weights.iter().map(&f).collect(),
            biases: self.biases.iter().map(&f).collect(),
            output: self.output,
        }
    }

    /// Forward pass without recording.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.n_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = matmul(&h, false, w, false)?;
            for r in 0..h.rows {
                let row = &mut h.data[r * h.cols..(r + 1) * h.cols];
                for (x, bias) in row.iter_mut().zip(&b.data) {
                    *x += bias;
                    if l < last {
                        *x = x.max(0.0);
                    } else if self.output == OutputActivation::Tanh {
                        *x = x.tanh();
                    }
                }
            }
        }
        Ok(h)
    }

    /// `self ← τ·online + (1−τ)·self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        let online = online.params();
        soft_update(&mut self.params_mut(), &online, tau)
    }

    pub fn write_checkpoint(&self, prefix: &str, checkpoint: &mut Checkpoint) {
        for (name, p) in self.param_names().into_iter().zip(self.params()) {
            checkpoint.insert(format!("{prefix}.{name}"), p.clone());
        }
    }

    pub fn read_checkpoint(&mut self, prefix: &str, checkpoint: &Checkpoint) -> Result<()> {
        let names = self.param_names();
        for (name, p) in names.into_iter().zip(self.params_mut()) {
            let key = format!("{prefix}.{name}");
            let stored = checkpoint
                .get(&key)
                .ok_or_else(|| AutodiffError::Checkpoint(format!("missing parameter {key}")))?;
            if stored.shape() != p.shape() {
                return Err(AutodiffError::ShapeMismatch(format!(
                    "{key} is {:?} in the checkpoint, {:?} in the network",
                    stored.shape(),
                    p.shape()
                )));
            }
            *p = stored.clone();
        }
        Ok(())
    }
}

/// An [`Mlp`] whose parameters are recorded on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    weights: Vec<Var>,
    biases: Vec<Var>,
    output: OutputActivation,
}

impl BoundMlp {
    pub fn forward(&self, x: &Var) -> Result<Var> {
        let mut h = x.clone();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.matmul(w)?.add(b)?;
            if l < last {
                h = h.relu();
            } else if self.output == OutputActivation::Tanh {
                h = h.tanh();
            }
        }
        Ok(h)
    }

    /// Parameter gradients in [`Mlp::params`] order, zero where the loss does not depend on them.
    pub fn grads(&self, grads: &Gradients) -> Vec<Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [grads.wrt(w), grads.wrt(b)])
            .collect()
    }
}

/// `target ← τ·online + (1−τ)·target`, elementwise.
pub fn soft_update(target: &mut [&mut Tensor], online: &[&Tensor], tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(AutodiffError::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    if target.len() != online.len() || target.iter().zip(online).any(|(t, o)| t.shape() != o.shape()) {
        return Err(AutodiffError::ShapeMismatch("soft update between different parameter sets".into()));
    }
    for (t, o) in target.iter_mut().zip(online) {
        for (x, y) in t.data.iter_mut().zip(&o.data) {
            *x = tau * y + (1.0 - tau) * *x;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step_count: u64,
}

impl Adam {
    pub fn new(lr: f64, params: &[&Tensor]) -> Self {
        let zeros = |p: &&Tensor| Tensor::zeros(p.rows, p.cols);
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "optimizer tracks {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(AutodiffError::ShapeMismatch("gradient does not match its parameter".into()));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m.data[i] / bias1;
                let v_hat = v.data[i] / bias2;
                p.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn step_mlp(&mut self, mlp: &mut Mlp, grads: &[Tensor]) -> Result<()> {
        self.step(&mut mlp.params_mut(), grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        Mlp::new(&[3, 8, 2], OutputActivation::Tanh, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn output_shape_and_tape_agreement() {
        let mlp = net(0);
        let x = Tensor::new(5, 3, (0..15).map(|i| i as f64 * 0.1 - 0.7).collect()).unwrap();
        let y = mlp.predict(&x).unwrap();
        assert_eq!(y.shape(), (5, 2));
        let tape = Tape::new();
        let taped = mlp.bind(&tape).forward(&tape.constant(x)).unwrap().value();
        for (a, b) in y.data.iter().zip(&taped.data) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn init_respects_fan_in_bounds_and_final_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp = Mlp::new(&[16, 32, 1], OutputActivation::Tanh, 1e-2, &mut rng);
        let params = mlp.params();
        assert!(params[0].data.iter().all(|x| x.abs() <= 0.25));
        assert!(params[2].data.iter().all(|x| x.abs() <= 1e-2 / 32f64.sqrt()));
    }

    #[test]
    fn frozen_binding_only_differentiates_the_input() {
        let mlp = net(1);
        let tape = Tape::new();
        let bound = mlp.bind_frozen(&tape);
        let x = tape.leaf(Tensor::row(&[0.2, -0.3, 0.4]));
        let grads = tape.backward(&bound.forward(&x).unwrap().sum()).unwrap();
        assert!(bound.grads(&grads).iter().all(|g| g.data.iter().all(|&v| v == 0.0)));
        assert!(grads.wrt(&x).data.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn soft_update_formula() {
        let mut target = Tensor::zeros(1, 2);
        let online = Tensor::filled(1, 2, 1.0);
        soft_update(&mut [&mut target], &[&online], 0.01).unwrap();
        assert_eq!(target.data, vec![0.01, 0.01]);
        soft_update(&mut [&mut target], &[&online], 1.0).unwrap();
        assert_eq!(target, online);
        assert!(soft_update(&mut [&mut target], &[&Tensor::zeros(2, 2)], 0.5).is_err());
        assert!(soft_update(&mut [&mut target], &[&online], 0.0).is_err());
    }

    #[test]
    fn repeated_soft_updates_decay_geometrically() {
        let mut target = Tensor::zeros(1, 1);
        let online = Tensor::scalar(1.0);
        for k in 1..=200 {
            soft_update(&mut [&mut target], &[&online], 0.05).unwrap();
            let gap = 1.0 - target.item();
            assert!((gap - 0.95f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_ignores_zero_gradients() {
        let mut mlp = net(2);
        let before = mlp.clone();
        let mut adam = Adam::new(1e-3, &mlp.params());
        let zeros: Vec<Tensor> = mlp.params().iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect();
        for _ in 0..10 {
            adam.step_mlp(&mut mlp, &zeros).unwrap();
        }
        assert_eq!(mlp, before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = Tensor::row(&[1.0, -1.0]);
        let mut adam = Adam::new(0.1, &[&p]);
        adam.step(&mut [&mut p], &[Tensor::row(&[3.0, -0.5])]).unwrap();
        assert!((p.data[0] - 0.9).abs() < 1e-8);
        assert!((p.data[1] + 0.9).abs() < 1e-8);
    }

    #[test]
    fn regression_fits_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::new(&[1, 16, 1], OutputActivation::Identity, 1.0, &mut rng);
        let mut adam = Adam::new(1e-2, &mlp.params());
        let xs = Tensor::new(16, 1, (0..16).map(|i| i as f64 / 8.0 - 1.0).collect()).unwrap();
        let ys = xs.map(|x| 0.5 * x - 0.2);
        let mut last = f64::INFINITY;
        for _ in 0..500 {
            let tape = Tape::new();
            let bound = mlp.bind(&tape);
            let pred = bound.forward(&tape.constant(xs.clone())).unwrap();
            let loss = pred.sub(&tape.constant(ys.clone())).unwrap().square().mean();
            last = loss.item();
            let grads = tape.backward(&loss).unwrap();
            adam.step_mlp(&mut mlp, &bound.grads(&grads)).unwrap();
        }
        assert!(last < 1e-3, "{last}");
        assert!(mlp.is_finite());
    }
}
