//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Finite-difference step used by [`gradient_error`].
pub const FD_STEP: f64 = 1e-4;

/// Norm-wise relative error between the tape gradient of the scalar `f` and central
/// differences with step [`FD_STEP`], taken over all inputs jointly.
pub fn gradient_error(inputs: &[Tensor], f: impl Fn(&[Var]) -> Var) -> f64 {
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&vars);
    let grads = tape.backward(&out).expect("scalar output");
    let eval = |ins: &[Tensor]| {
        let t = Tape::new();
        let vs: Vec<Var> = ins.iter().map(|x| t.constant(x.clone())).collect();
        f(&vs).item()
    };
    let (mut diff, mut norm) = (0.0_f64, 0.0_f64);
    let mut work = inputs.to_vec();
    for k in 0..inputs.len() {
        let analytic = grads.wrt(&vars[k]);
        for e in 0..inputs[k].data.len() {
            let x = inputs[k].data[e];
            work[k].data[e] = x + FD_STEP;
            let plus = eval(&work);
            work[k].data[e] = x - FD_STEP;
            let minus = eval(&work);
            work[k].data[e] = x;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            diff += (numeric - analytic.data[e]).powi(2);
            norm += numeric.powi(2).max(analytic.data[e].powi(2));
        }
    }
    diff.sqrt() / norm.sqrt().max(1e-12)
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("sized")
}

/// Moves entries at least 0.1 away from 0 and from ±0.5, the kinks of relu, abs and the
/// `[-0.5, 0.5]` clip used below.
fn away_from_kinks(t: Tensor) -> Tensor {
    t.map(|x| {
        let mut y = if x.abs() < 0.1 { x + 0.2_f64.copysign(x) } else { x };
        if (y.abs() - 0.5).abs() < 0.1 {
            y += 0.2_f64.copysign(y);
        }
        y
    })
}

/// Gradient errors of every primitive on random shapes drawn from `seed`.
pub fn primitive_suite(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(1..=5);
    let cols = rng.random_range(2..=5);
    let inner = rng.random_range(1..=4);
    let a = away_from_kinks(random(&mut rng, rows, cols));
    let b = away_from_kinks(random(&mut rng, rows, cols));
    let row = random(&mut rng, 1, cols);
    let col = random(&mut rng, rows, 1);
    let right = random(&mut rng, cols, inner);
    let positive = random(&mut rng, rows, cols).map(|x| x.abs() + 0.5);
    let noise = random(&mut rng, rows, cols);
    let picks: Vec<usize> = (0..rows + 2).map(|_| rng.random_range(0..rows)).collect();
    let split = rng.random_range(1..cols);

    type Case = (&'static str, Vec<Tensor>, Box<dyn Fn(&[Var]) -> Var>);
    let cases: Vec<Case> = vec![
        ("matmul", vec![a.clone(), right], Box::new(|v| v[0].matmul(&v[1]).unwrap().square().sum())),
        ("add", vec![a.clone(), b.clone()], Box::new(|v| v[0].add(&v[1]).unwrap().square().sum())),
        ("add_broadcast", vec![a.clone(), row.clone()], Box::new(|v| v[0].add(&v[1]).unwrap().square().sum())),
        ("sub_broadcast", vec![a.clone(), col], Box::new(|v| v[0].sub(&v[1]).unwrap().square().sum())),
        ("mul", vec![a.clone(), b.clone()], Box::new(|v| v[0].mul(&v[1]).unwrap().sum())),
        ("mul_broadcast", vec![a.clone(), row], Box::new(|v| v[0].mul(&v[1]).unwrap().tanh().sum())),
        ("scale", vec![a.clone()], Box::new(|v| v[0].scale(-2.5).add_scalar(0.3).square().mean())),
        ("tanh", vec![a.clone()], Box::new(|v| v[0].tanh().square().sum())),
        ("relu", vec![a.clone()], Box::new(|v| v[0].relu().square().sum())),
        ("exp", vec![a.clone()], Box::new(|v| v[0].exp().mean())),
        ("sqrt", vec![positive], Box::new(|v| v[0].sqrt().sum())),
        ("square", vec![a.clone()], Box::new(|v| v[0].square().tanh().sum())),
        ("abs", vec![a.clone()], Box::new(|v| v[0].abs().square().sum())),
        ("clip", vec![a.clone()], Box::new(|v| v[0].clip(-0.5, 0.5).square().sum())),
        ("sum", vec![a.clone()], Box::new(|v| v[0].sum().square())),
        ("mean", vec![a.clone()], Box::new(|v| v[0].mean().square())),
        ("l1_norm", vec![a.clone()], Box::new(|v| v[0].l1_norm().square().sum())),
        ("sum_rows", vec![a.clone()], Box::new(|v| v[0].sum_rows().square().sum())),
        (
            "concat",
            vec![a.clone(), b.clone()],
            Box::new(|v| Var::concat_cols(&[&v[0], &v[1]]).unwrap().tanh().sum()),
        ),
        (
            "slice",
            vec![a.clone()],
            Box::new(move |v| v[0].slice_cols(0, split).unwrap().square().sum()),
        ),
        (
            "gather",
            vec![a.clone()],
            Box::new(move |v| v[0].gather_rows(&picks).unwrap().tanh().square().sum()),
        ),
        (
            "gaussian_sample",
            vec![a, b],
            Box::new(move |v| Var::gaussian_sample(&v[0], &v[1], &noise).unwrap().square().sum()),
        ),
    ];
    cases
        .into_iter()
        .map(|(name, inputs, f)| (name, gradient_error(&inputs, f)))
        .collect()
}
