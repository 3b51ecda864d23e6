//! Training loop, evaluation, and post-training diagnostics.

use std::collections::VecDeque;

use homdp_autodiff::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::agent::{seeded_stream, Agent, AuxDraws};
use super::config::AgentConfig;
use super::replay::ReplayBuffer;
use crate::envs::{clip_action, mirror_observation, ContinuousEnv};
use crate::error::Result;

const ENV_STREAM: u64 = 10;
const EXPLORATION_STREAM: u64 = 11;
const REPLAY_STREAM: u64 = 12;
const UPDATE_STREAM: u64 = 13;
const EVAL_STREAM: u64 = 14;

/// One row of the run log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRow {
    pub step: u64,
    /// Return of the episode that ended at this step.
    pub episode_return: Option<f64>,
    #[serde(rename = "L_actual")]
    pub l_actual: Option<f64>,
    #[serde(rename = "L_abstract")]
    pub l_abstract: Option<f64>,
    #[serde(rename = "L_lax")]
    pub l_lax: Option<f64>,
    #[serde(rename = "L_h")]
    pub l_h: Option<f64>,
    /// Mean of the per-update value-equivalence error over the trailing diagnostic window.
    pub value_equiv_error: Option<f64>,
    pub exploration_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub steps: u64,
    pub episodes: usize,
    pub episode_returns: Vec<f64>,
    /// Returns of the deterministic evaluation episodes after training.
    pub eval_returns: Vec<f64>,
    pub final_return: f64,
    /// `(step, trailing value-equivalence error)` at every multiple of the diagnostic window.
    pub value_equiv_trace: Vec<(u64, f64)>,
}

impl RunSummary {
    /// The trailing diagnostic recorded at `step`, if any.
    pub fn value_equiv_at(&self, step: u64) -> Option<f64> {
        self.value_equiv_trace.iter().find(|(s, _)| *s == step).map(|(_, v)| *v)
    }
}

/// Runs one agent step of `action_repeat` environment steps; returns the summed reward,
/// the next state and how many environment steps were taken.
fn repeat_step(
    env: &dyn ContinuousEnv,
    state: &[f64],
    action: &[f64],
    repeat: u64,
    remaining: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, usize) {
    let mut state = state.to_vec();
    let mut total = 0.0;
    let mut taken = 0;
    while (taken as u64) < repeat && taken < remaining {
        let (next, r) = env.step(&state, action, rng);
        state = next;
        total += r;
        taken += 1;
    }
    (state, total, taken)
}

/// Trains `config.variant` on `env` for `total_steps` agent steps. `sink` receives one row per
/// step. Every random draw comes from streams of `seed`.
pub fn train(
    env: &dyn ContinuousEnv,
    config: &AgentConfig,
    seed: u64,
    total_steps: u64,
    sink: &mut dyn FnMut(&StepRow) -> Result<()>,
) -> Result<(Agent, RunSummary)> {
    config.validate()?;
    let obs_dim = env.observation_dim();
    let action_dim = env.action_dim();
    let mut agent = Agent::new(config.clone(), obs_dim, action_dim, seed)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, obs_dim, action_dim);
    let mut env_rng = seeded_stream(seed, ENV_STREAM);
    let mut explore_rng = seeded_stream(seed, EXPLORATION_STREAM);
    let mut replay_rng = seeded_stream(seed, REPLAY_STREAM);
    let mut update_rng = seeded_stream(seed, UPDATE_STREAM);
    let update_start = config.seed_frames / config.action_repeat;
    let episode_length = env.episode_length();

    let mut state = env.reset(&mut env_rng);
    let mut obs = env.observe(&state);
    let (mut episode_return, mut episode_steps) = (0.0, 0usize);
    let mut episode_returns = Vec::new();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(config.diagnostic_window);
    let mut window_sum = 0.0;
    let mut trace = Vec::new();

    for step in 0..total_steps {
        let std = config.exploration_std.value(step * config.action_repeat);
        let action: Vec<f64> = if step < config.exploration_steps {
            (0..action_dim).map(|_| explore_rng.random_range(-1.0..=1.0)).collect()
        } else {
            let mean = agent.act(&obs)?;
            let noisy: Vec<f64> = mean
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(&mut explore_rng);
                    a + std * z
                })
                .collect();
            clip_action(&noisy)
        };
        let (next_state, reward, taken) = repeat_step(
            env,
            &state,
            &action,
            config.action_repeat,
            episode_length - episode_steps,
            &mut env_rng,
        );
        episode_steps += taken;
        episode_return += reward;
        let done = episode_steps >= episode_length;
        let next_obs = env.observe(&next_state);
        buffer.push(&obs, &action, reward, &next_obs, done)?;

        let mut row = StepRow {
            step,
            episode_return: None,
            l_actual: None,
            l_abstract: None,
            l_lax: None,
            l_h: None,
            value_equiv_error: None,
            exploration_std: std,
        };
        if step >= update_start {
            let batch = buffer.sample(config.batch_size, config.n_step, config.gamma, &mut replay_rng)?;
            let draws = AuxDraws::draw(
                &mut update_rng,
                config.batch_size,
                action_dim,
                agent.abstract_state_dim(),
            );
            let info = agent.update(&batch, &draws, std)?;
            row.l_actual = Some(info.losses.actual);
            if let Some(err) = info.value_equiv_error {
                row.l_abstract = Some(info.losses.abstract_critic);
                row.l_lax = Some(info.losses.lax);
                row.l_h = Some(info.losses.model);
                if window.len() == config.diagnostic_window {
                    window_sum -= window.pop_front().expect("full window");
                }
                window.push_back(err);
                window_sum += err;
                row.value_equiv_error = Some(window_sum / window.len() as f64);
            }
        }
        if let Some(v) = row.value_equiv_error {
            if (step + 1) % config.diagnostic_window as u64 == 0 {
                trace.push((step + 1, v));
            }
        }
        if done {
            row.episode_return = Some(episode_return);
            episode_returns.push(episode_return);
            state = env.reset(&mut env_rng);
            obs = env.observe(&state);
            episode_return = 0.0;
            episode_steps = 0;
        } else {
            state = next_state;
            obs = next_obs;
        }
        sink(&row)?;
    }

    let eval_returns = evaluate(env, &agent, config.eval_episodes, config.action_repeat, seed)?;
    let final_return = eval_returns.iter().sum::<f64>() / eval_returns.len() as f64;
    let summary = RunSummary {
        variant: config.variant.name().to_string(),
        seed,
        steps: total_steps,
        episodes: episode_returns.len(),
        episode_returns,
        eval_returns,
        final_return,
        value_equiv_trace: trace,
    };
    Ok((agent, summary))
}

/// Undiscounted returns of full episodes under the deterministic policy.
pub fn evaluate(env: &dyn ContinuousEnv, agent: &Agent, episodes: usize, action_repeat: u64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seeded_stream(seed, EVAL_STREAM);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(&mut rng);
        let (mut total, mut steps) = (0.0, 0usize);
        while steps < env.episode_length() {
            let action = agent.act(&env.observe(&state))?;
            let (next, r, taken) =
                repeat_step(env, &state, &action, action_repeat, env.episode_length() - steps, &mut rng);
            state = next;
            total += r;
            steps += taken;
        }
        returns.push(total);
    }
    Ok(returns)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub n_probes: usize,
    pub threshold: f64,
    /// Fraction of probes with `‖g(o, a) − g(mirror(o), −a)‖₂ ≤ threshold`.
    pub fraction_within: f64,
    pub median_distance: f64,
    /// Smallest singular value of `∇_a g(o, a)` over the probes, by central differences;
    /// 0 means g is locally not invertible in the action.
    pub min_jacobian_singular_value: f64,
}

/// Checks whether the learned action map identifies pendulum states and actions related by
/// the reflection. Probes cover θ on a 12-point grid, θ̇ ∈ {−4, −2, 0, 2, 4} and five actions.
pub fn pendulum_symmetry_report(agent: &Agent, threshold: f64) -> Result<Option<SymmetryReport>> {
    let mut obs_rows = Vec::new();
    let mut mirrored_rows = Vec::new();
    let mut actions = Vec::new();
    for i in 0..12 {
        let theta = -std::f64::consts::PI + (i as f64 + 0.5) * std::f64::consts::TAU / 12.0;
        for speed in [-4.0, -2.0, 0.0, 2.0, 4.0] {
            for a in [-0.8, -0.4, 0.0, 0.4, 0.8] {
                let obs = vec![theta.cos(), theta.sin(), speed];
                mirrored_rows.extend(mirror_observation(&obs));
                obs_rows.extend(obs);
                actions.push(a);
            }
        }
    }
    let n = actions.len();
    let obs = Tensor::new(n, 3, obs_rows)?;
    let mirrored = Tensor::new(n, 3, mirrored_rows)?;
    let act = Tensor::new(n, 1, actions.clone())?;
    let neg = Tensor::new(n, 1, actions.iter().map(|a| -a).collect())?;
    let Some(g) = agent.encode_actions(&obs, &act)? else {
        return Ok(None);
    };
    let g_mirror = agent.encode_actions(&mirrored, &neg)?.expect("abstraction present");
    let da = g.cols;
    let mut distances: Vec<f64> = (0..n)
        .map(|i| {
            (0..da)
                .map(|k| (g.get(i, k) - g_mirror.get(i, k)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let within = distances.iter().filter(|&&d| d <= threshold).count();

    let h = 1e-5;
    let shifted = |delta: f64| Tensor::new(n, 1, actions.iter().map(|a| a + delta).collect());
    let plus = agent.encode_actions(&obs, &shifted(h)?)?.expect("abstraction present");
    let minus = agent.encode_actions(&obs, &shifted(-h)?)?.expect("abstraction present");
    let min_singular = (0..n)
        .map(|i| {
            (0..da)
                .map(|k| ((plus.get(i, k) - minus.get(i, k)) / (2.0 * h)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);

    distances.sort_by(f64::total_cmp);
    Ok(Some(SymmetryReport {
        n_probes: n,
        threshold,
        fraction_within: within as f64 / n as f64,
        median_distance: distances[n / 2],
        min_jacobian_singular_value: min_singular,
    }))
}
