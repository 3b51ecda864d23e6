//! Actor-critic that learns a policy together with an MDP homomorphism `(f, g)` and the
//! abstract MDP `(R̄, τ̄)` it maps onto.

use homdp_autodiff::tape::{LOG_STD_MAX, LOG_STD_MIN};
use homdp_autodiff::{Adam, BoundMlp, Checkpoint, Mlp, OutputActivation, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{AgentConfig, Variant};
use super::replay::Batch;
use crate::error::{ControlError, Result};

/// Random stream `stream` of a run seeded with `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids for network initialisation.
const INIT_STREAMS: [u64; 7] = [1, 2, 3, 4, 5, 6, 7];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Losses {
    pub actual: f64,
    pub abstract_critic: f64,
    pub lax: f64,
    pub model: f64,
}

/// Randomness consumed by one critic update, drawn up front so that losses are pure
/// functions of `(batch, draws)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxDraws {
    /// Standard normal noise for target-policy smoothing, `batch × action_dim`.
    pub target_noise: Vec<f64>,
    /// Pairing of batch rows for the encoder loss.
    pub permutation: Vec<usize>,
    /// Standard normal noise for the reparameterised transition sample, `batch × abstract_state_dim`.
    pub model_noise: Vec<f64>,
}

impl AuxDraws {
    pub fn draw(rng: &mut ChaCha8Rng, batch: usize, action_dim: usize, abstract_state_dim: usize) -> Self {
        let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect() };
        let target_noise = normal(batch * action_dim);
        let model_noise = normal(batch * abstract_state_dim);
        let mut permutation: Vec<usize> = (0..batch).collect();
        permutation.shuffle(rng);
        Self {
            target_noise,
            permutation,
            model_noise,
        }
    }

    /// No noise and the identity pairing.
    pub fn zeros(batch: usize, action_dim: usize, abstract_state_dim: usize) -> Self {
        Self {
            target_noise: vec![0.0; batch * action_dim],
            permutation: (0..batch).collect(),
            model_noise: vec![0.0; batch * abstract_state_dim],
        }
    }
}

/// What one call to [`Agent::update`] did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateInfo {
    pub losses: Losses,
    /// `mean |Q(s, a) − Q̄(f(s), g(s, a))| / (max Q − min Q)` over the batch; `None` for DDPG.
    pub value_equiv_error: Option<f64>,
    pub actor_updated: bool,
}

/// Which terms of the actor objective to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActorTerms {
    pub dpg: bool,
    pub hpg: bool,
}

/// Row-wise `W₂` between diagonal Gaussians: `sqrt(‖μ_a − μ_b‖² + ‖σ_a − σ_b‖²)`, shape `(rows, 1)`.
pub fn w2_diag_gaussian(mean_a: &Var, std_a: &Var, mean_b: &Var, std_b: &Var) -> Result<Var> {
    let mean_gap = mean_a.sub(mean_b)?.square().sum_cols();
    let std_gap = std_a.sub(std_b)?.square().sum_cols();
    Ok(mean_gap.add(&std_gap)?.sqrt())
}

/// Splits transition-model output into mean and clamped standard deviation.
fn split_gaussian(out: &Var, dim: usize) -> Result<(Var, Var)> {
    let mean = out.slice_cols(0, dim)?;
    let log_std = out.slice_cols(dim, 2 * dim)?.clip(LOG_STD_MIN, LOG_STD_MAX);
    Ok((mean, log_std.exp()))
}

/// Encoder regression onto the lax distance:
/// `mean[(‖s̄_i − s̄_j‖₁ − (|r_i − r_j| + α·W₂(τ̄(·|s̄_i, ā_i), τ̄(·|s̄_j, ā_j))))²]` with `j = perm(i)`.
/// The encoder enters the transition model detached; the action map and the model stay live.
pub fn lax_loss(
    encoded: &Var,
    abstract_action: &Var,
    reward: &Var,
    transition: &BoundMlp,
    permutation: &[usize],
    lax_weight: f64,
) -> Result<Var> {
    let dim = encoded.shape().1;
    let distance = encoded.sub(&encoded.gather_rows(permutation)?)?.l1_norm();
    let reward_gap = reward.sub(&reward.gather_rows(permutation)?)?.abs();
    let model_in = Var::concat_cols(&[&encoded.detach(), abstract_action])?;
    let (mean, std) = split_gaussian(&transition.forward(&model_in)?, dim)?;
    let w2 = w2_diag_gaussian(
        &mean,
        &std,
        &mean.gather_rows(permutation)?,
        &std.gather_rows(permutation)?,
    )?;
    let target = reward_gap.add(&w2.scale(lax_weight))?;
    Ok(distance.sub(&target)?.square().mean())
}

/// `mean[Σ_k (f(s′) − s̄′)_k² + (r − R̄(f(s)))²]` with `s̄′` a reparameterised sample of
/// `τ̄(·|f(s), g(s, a))`.
pub fn model_loss(
    encoded: &Var,
    abstract_action: &Var,
    next_encoded: &Var,
    reward: &Var,
    transition: &BoundMlp,
    reward_model: &BoundMlp,
    noise: &Tensor,
) -> Result<Var> {
    let dim = encoded.shape().1;
    let out = transition.forward(&Var::concat_cols(&[encoded, abstract_action])?)?;
    let mean = out.slice_cols(0, dim)?;
    let log_std = out.slice_cols(dim, 2 * dim)?;
    let sample = Var::gaussian_sample(&mean, &log_std, noise)?;
    let transition_term = next_encoded.sub(&sample)?.square().sum_cols().mean();
    let reward_term = reward.sub(&reward_model.forward(encoded)?)?.square().mean();
    Ok(transition_term.add(&reward_term)?)
}

/// A network with its Adam state.
#[derive(Clone, Debug)]
struct Trained {
    net: Mlp,
    opt: Adam,
}

impl Trained {
    fn new(net: Mlp, lr: f64) -> Self {
        let opt = Adam::new(lr, &net.params());
        Self { net, opt }
    }

    fn step(&mut self, grads: &[Tensor]) -> Result<()> {
        Ok(self.opt.step_mlp(&mut self.net, grads)?)
    }
}

/// Learned homomorphism and abstract MDP.
#[derive(Clone, Debug)]
struct Abstraction {
    /// `f`, `g`; `None` in identity mode.
    state_map: Option<Trained>,
    action_map: Option<Trained>,
    reward_model: Trained,
    transition: Trained,
    /// Separate abstract critic and its target; `None` when the actual critic is shared.
    critic: Option<Trained>,
    critic_target: Option<Mlp>,
}

#[derive(Clone, Debug)]
pub struct Agent {
    config: AgentConfig,
    obs_dim: usize,
    action_dim: usize,
    abstract_state_dim: usize,
    abstract_action_dim: usize,
    actor: Trained,
    actor_target: Mlp,
    critic: Trained,
    critic_target: Mlp,
    abstraction: Option<Abstraction>,
    updates: u64,
}

fn batch_tensor(data: &[f64], rows: usize) -> Tensor {
    let cols = if rows == 0 { 0 } else { data.len() / rows };
    Tensor::new(rows, cols, data.to_vec()).expect("batch layout")
}

fn concat_rows(a: &Tensor, b: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    for r in 0..a.rows {
        data.extend_from_slice(a.row_slice(r));
        data.extend_from_slice(b.row_slice(r));
    }
    Tensor::new(a.rows, a.cols + b.cols, data).expect("matching rows")
}

fn finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ControlError::NumericalDivergence(format!("{name} loss is {value}")))
    }
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, action_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let lr = config.learning_rate;
        let ds = config.abstract_state_dim.unwrap_or(obs_dim);
        let da = config.abstract_action_dim.unwrap_or(action_dim);
        let mut init = INIT_STREAMS.map(|k| seeded_stream(seed, k));
        let actor = Mlp::new(&[obs_dim, h, action_dim], OutputActivation::Tanh, 1.0, &mut init[0]);
        let critic = Mlp::new(&[obs_dim + action_dim, h, 1], OutputActivation::Identity, 1.0, &mut init[1]);
        let abstraction = if config.variant.learns_homomorphism() {
            let critic = (config.variant != Variant::DhpgSingleCritic).then(|| {
                Mlp::new(&[ds + da, h, 1], OutputActivation::Identity, 1.0, &mut init[2])
            });
            let (state_map, action_map) = if config.identity_maps {
                (None, None)
            } else {
                (
                    Some(Mlp::new(&[obs_dim, h, ds], OutputActivation::Identity, 1.0, &mut init[3])),
                    Some(Mlp::new(&[obs_dim + action_dim, h, da], OutputActivation::Tanh, 1.0, &mut init[4])),
                )
            };
            let reward_model = Mlp::new(&[ds, h, 1], OutputActivation::Identity, 1.0, &mut init[5]);
            let transition = Mlp::new(&[ds + da, h, 2 * ds], OutputActivation::Identity, 1.0, &mut init[6]);
            Some(Abstraction {
                state_map: state_map.map(|n| Trained::new(n, lr)),
                action_map: action_map.map(|n| Trained::new(n, lr)),
                reward_model: Trained::new(reward_model, lr),
                transition: Trained::new(transition, lr),
                critic_target: critic.clone(),
                critic: critic.map(|n| Trained::new(n, lr)),
            })
        } else {
            None
        };
        Ok(Self {
            obs_dim,
            action_dim,
            abstract_state_dim: ds,
            abstract_action_dim: da,
            actor_target: actor.clone(),
            actor: Trained::new(actor, lr),
            critic_target: critic.clone(),
            critic: Trained::new(critic, lr),
            abstraction,
            updates: 0,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn abstract_state_dim(&self) -> usize {
        self.abstract_state_dim
    }

    pub fn abstract_action_dim(&self) -> usize {
        self.abstract_action_dim
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor.net
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic.net
    }

    /// Mutable access to the networks, for tests and checkpoint restores.
    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor.net
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic.net
    }

    pub fn abstract_critic_mut(&mut self) -> Option<&mut Mlp> {
        self.abstraction.as_mut()?.critic.as_mut().map(|t| &mut t.net)
    }

    pub fn transition_model_mut(&mut self) -> Option<&mut Mlp> {
        self.abstraction.as_mut().map(|a| &mut a.transition.net)
    }

    pub fn reward_model_mut(&mut self) -> Option<&mut Mlp> {
        self.abstraction.as_mut().map(|a| &mut a.reward_model.net)
    }

    /// Makes every target network equal to its online network.
    pub fn sync_targets(&mut self) {
        self.actor_target = self.actor.net.clone();
        self.critic_target = self.critic.net.clone();
        if let Some(abs) = self.abstraction.as_mut() {
            abs.critic_target = abs.critic.as_ref().map(|t| t.net.clone());
        }
    }

    /// Deterministic action `π(o)` for a single observation.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.net.predict(&Tensor::row(obs))?.data)
    }

    /// `f(o)` for a batch of observations (`rows × obs_dim`); `None` without an abstraction.
    pub fn encode_states(&self, obs: &Tensor) -> Result<Option<Tensor>> {
        match &self.abstraction {
            None => Ok(None),
            Some(abs) => Ok(Some(match &abs.state_map {
                Some(f) => f.net.predict(obs)?,
                None => obs.clone(),
            })),
        }
    }

    /// `g(o, a)` for a batch; `None` without an abstraction.
    pub fn encode_actions(&self, obs: &Tensor, action: &Tensor) -> Result<Option<Tensor>> {
        match &self.abstraction {
            None => Ok(None),
            Some(abs) => Ok(Some(match &abs.action_map {
                Some(g) => g.net.predict(&concat_rows(obs, action))?,
                None => action.clone(),
            })),
        }
    }

    fn abstract_target_net(&self) -> &Mlp {
        let abs = self.abstraction.as_ref().expect("abstraction present");
        abs.critic_target.as_ref().unwrap_or(&self.critic_target)
    }

    /// TD targets `R + γ^m Q′(s_{t+m}, a′)` in actual and abstract coordinates, with
    /// `a′ = clip(π′(s_{t+m}) + clip(σ ε, −c, c), −1, 1)`.
    fn targets(&self, batch: &Batch, draws: &AuxDraws, std: f64) -> Result<(Tensor, Option<Tensor>)> {
        let b = batch.size;
        let boot = batch_tensor(&batch.bootstrap_obs, b);
        let mut next_action = self.actor_target.predict(&boot)?;
        let c = self.config.noise_clip;
        for (a, z) in next_action.data.iter_mut().zip(&draws.target_noise) {
            *a = (*a + (std * z).clamp(-c, c)).clamp(-1.0, 1.0);
        }
        let bootstrap = |q: Tensor| -> Tensor {
            let data = (0..b)
                .map(|i| batch.n_step_return[i] + batch.discount[i] * q.data[i])
                .collect();
            Tensor::new(b, 1, data).expect("column")
        };
        let actual = bootstrap(self.critic_target.predict(&concat_rows(&boot, &next_action))?);
        let abstract_target = match self.encode_states(&boot)? {
            None => None,
            Some(s_bar) => {
                let a_bar = self.encode_actions(&boot, &next_action)?.expect("abstraction present");
                Some(bootstrap(self.abstract_target_net().predict(&concat_rows(&s_bar, &a_bar))?))
            }
        };
        Ok((actual, abstract_target))
    }

    /// Builds all critic-side losses on `tape` and returns them with the bound networks.
    fn critic_graph(&self, tape: &Tape, batch: &Batch, draws: &AuxDraws, std: f64) -> Result<CriticGraph> {
        let b = batch.size;
        let (y, y_bar) = self.targets(batch, draws, std)?;
        let obs = tape.constant(batch_tensor(&batch.obs, b));
        let action = tape.constant(batch_tensor(&batch.action, b));
        let critic = self.critic.net.bind(tape);
        let q = critic.forward(&Var::concat_cols(&[&obs, &action])?)?;
        let actual = q.sub(&tape.constant(y))?.square().mean();
        let mut graph = CriticGraph {
            actual,
            abstract_critic: None,
            lax: None,
            model: None,
            q,
            q_bar: None,
            critic,
            abstract_critic_net: None,
            state_map: None,
            action_map: None,
            reward_model: None,
            transition: None,
        };
        let Some(abs) = &self.abstraction else {
            return Ok(graph);
        };
        let state_map = abs.state_map.as_ref().map(|t| t.net.bind(tape));
        let action_map = abs.action_map.as_ref().map(|t| t.net.bind(tape));
        let s_bar = match &state_map {
            Some(f) => f.forward(&obs)?,
            None => obs.clone(),
        };
        let a_bar = match &action_map {
            Some(g) => g.forward(&Var::concat_cols(&[&obs, &action])?)?,
            None => action.clone(),
        };
        let abstract_critic_net = abs.critic.as_ref().map(|t| t.net.bind(tape));
        let q_bar = abstract_critic_net
            .as_ref()
            .unwrap_or(&graph.critic)
            .forward(&Var::concat_cols(&[&s_bar, &a_bar])?)?;
        let abstract_loss = q_bar
            .sub(&tape.constant(y_bar.expect("abstraction present")))?
            .square()
            .mean();

        let reward = tape.constant(Tensor::new(b, 1, batch.reward.clone())?);
        let transition = abs.transition.net.bind(tape);
        let reward_model = abs.reward_model.net.bind(tape);
        let lax = lax_loss(&s_bar, &a_bar, &reward, &transition, &draws.permutation, self.config.lax_weight)?;
        let next_obs = tape.constant(batch_tensor(&batch.next_obs, b));
        let next_encoded = match &state_map {
            Some(f) if !self.config.detach_next_state_encoding => f.forward(&next_obs)?,
            Some(f) => f.forward(&next_obs)?.detach(),
            None => next_obs,
        };
        let noise = Tensor::new(b, self.abstract_state_dim, draws.model_noise.clone())?;
        let model = model_loss(&s_bar, &a_bar, &next_encoded, &reward, &transition, &reward_model, &noise)?;

        graph.abstract_critic = Some(abstract_loss);
        graph.lax = Some(lax);
        graph.model = Some(model);
        graph.q_bar = Some(q_bar);
        graph.abstract_critic_net = abstract_critic_net;
        graph.state_map = state_map;
        graph.action_map = action_map;
        graph.reward_model = Some(reward_model);
        graph.transition = Some(transition);
        Ok(graph)
    }

    /// Critic, encoder and model losses on a batch without updating anything.
    pub fn critic_losses(&self, batch: &Batch, draws: &AuxDraws, std: f64) -> Result<Losses> {
        let tape = Tape::new();
        Ok(self.critic_graph(&tape, batch, draws, std)?.losses())
    }

    /// Actor objective `−mean[Q(s, π(s))] − mean[Q̄(f(s), g(s, π(s)))]` restricted to `terms`,
    /// with every network but the actor frozen.
    fn actor_objective(&self, tape: &Tape, obs: &Tensor, terms: ActorTerms) -> Result<(Var, BoundMlp)> {
        let actor = self.actor.net.bind(tape);
        let obs = tape.constant(obs.clone());
        let action = actor.forward(&obs)?;
        let mut loss: Option<Var> = None;
        let mut add = |term: Var| -> Result<()> {
            loss = Some(match loss.take() {
                None => term,
                Some(l) => l.add(&term)?,
            });
            Ok(())
        };
        if terms.dpg {
            let critic = self.critic.net.bind_frozen(tape);
            add(critic.forward(&Var::concat_cols(&[&obs, &action])?)?.mean().neg())?;
        }
        if terms.hpg {
            let abs = self.abstraction.as_ref().ok_or_else(|| {
                ControlError::InvalidConfig("the HPG term needs a learned homomorphism".into())
            })?;
            let s_bar = match &abs.state_map {
                Some(f) => f.net.bind_frozen(tape).forward(&obs)?,
                None => obs.clone(),
            };
            let a_bar = match &abs.action_map {
                Some(g) => g.net.bind_frozen(tape).forward(&Var::concat_cols(&[&obs, &action])?)?,
                None => action.clone(),
            };
            let critic = abs.critic.as_ref().map_or(&self.critic.net, |t| &t.net).bind_frozen(tape);
            add(critic.forward(&Var::concat_cols(&[&s_bar, &a_bar])?)?.mean().neg())?;
        }
        let loss = loss.ok_or_else(|| ControlError::InvalidConfig("empty actor objective".into()))?;
        Ok((loss, actor))
    }

    pub fn actor_loss(&self, obs: &Tensor, terms: ActorTerms) -> Result<f64> {
        let tape = Tape::new();
        Ok(self.actor_objective(&tape, obs, terms)?.0.item())
    }

    /// Gradient of [`Agent::actor_loss`] with respect to the actor parameters.
    pub fn actor_gradient(&self, obs: &Tensor, terms: ActorTerms) -> Result<Vec<Tensor>> {
        let tape = Tape::new();
        let (loss, actor) = self.actor_objective(&tape, obs, terms)?;
        let grads = tape.backward(&loss)?;
        Ok(actor.grads(&grads))
    }

    fn actor_step(&mut self, obs: &Tensor, terms: ActorTerms) -> Result<()> {
        let grads = self.actor_gradient(obs, terms)?;
        self.actor.step(&grads)
    }

    /// One combined critic/encoder/model update; every `actor_delay` updates also an actor
    /// update, and every `target_update_freq` updates a soft target update.
    pub fn update(&mut self, batch: &Batch, draws: &AuxDraws, std: f64) -> Result<UpdateInfo> {
        let tape = Tape::new();
        let graph = self.critic_graph(&tape, batch, draws, std)?;
        let losses = graph.losses();
        finite("actual critic", losses.actual)?;
        finite("abstract critic", losses.abstract_critic)?;
        finite("encoder", losses.lax)?;
        finite("model", losses.model)?;
        let value_equiv_error = graph.value_equiv_error();
        let total = graph.total()?;
        let grads = tape.backward(&total)?;
        self.critic.step(&graph.critic.grads(&grads))?;
        if let Some(abs) = self.abstraction.as_mut() {
            let pairs: [(Option<&mut Trained>, Option<&BoundMlp>); 5] = [
                (abs.critic.as_mut(), graph.abstract_critic_net.as_ref()),
                (abs.state_map.as_mut(), graph.state_map.as_ref()),
                (abs.action_map.as_mut(), graph.action_map.as_ref()),
                (Some(&mut abs.reward_model), graph.reward_model.as_ref()),
                (Some(&mut abs.transition), graph.transition.as_ref()),
            ];
            for (net, bound) in pairs {
                if let (Some(net), Some(bound)) = (net, bound) {
                    net.step(&bound.grads(&grads))?;
                }
            }
        }
        drop(graph);

        self.updates += 1;
        let actor_updated = self.updates % self.config.actor_delay == 0;
        if actor_updated {
            let obs = batch_tensor(&batch.obs, batch.size);
            let both = ActorTerms { dpg: true, hpg: true };
            match self.config.variant {
                Variant::DhpgSummed | Variant::DhpgSingleCritic => self.actor_step(&obs, both)?,
                Variant::DhpgIndependent => {
                    self.actor_step(&obs, ActorTerms { dpg: true, hpg: false })?;
                    self.actor_step(&obs, ActorTerms { dpg: false, hpg: true })?;
                }
                Variant::DhpgNoDpg => self.actor_step(&obs, ActorTerms { dpg: false, hpg: true })?,
                Variant::Ddpg => self.actor_step(&obs, ActorTerms { dpg: true, hpg: false })?,
            }
            if !self.actor.net.is_finite() {
                return Err(ControlError::NumericalDivergence("actor parameters became non-finite".into()));
            }
        }
        if self.updates % self.config.target_update_freq == 0 {
            let tau = self.config.tau;
            self.actor_target.soft_update_from(&self.actor.net, tau)?;
            self.critic_target.soft_update_from(&self.critic.net, tau)?;
            if let Some(abs) = self.abstraction.as_mut() {
                if let (Some(target), Some(online)) = (abs.critic_target.as_mut(), abs.critic.as_ref()) {
                    target.soft_update_from(&online.net, tau)?;
                }
            }
        }
        Ok(UpdateInfo {
            losses,
            value_equiv_error,
            actor_updated,
        })
    }

    /// All parameters, online and target, under stable names.
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.actor.net.write_checkpoint("actor", &mut ck);
        self.actor_target.write_checkpoint("actor_target", &mut ck);
        self.critic.net.write_checkpoint("critic", &mut ck);
        self.critic_target.write_checkpoint("critic_target", &mut ck);
        if let Some(abs) = &self.abstraction {
            if let Some(c) = &abs.critic {
                c.net.write_checkpoint("abstract_critic", &mut ck);
            }
            if let Some(c) = &abs.critic_target {
                c.write_checkpoint("abstract_critic_target", &mut ck);
            }
            if let Some(f) = &abs.state_map {
                f.net.write_checkpoint("state_map", &mut ck);
            }
            if let Some(g) = &abs.action_map {
                g.net.write_checkpoint("action_map", &mut ck);
            }
            abs.reward_model.net.write_checkpoint("reward_model", &mut ck);
            abs.transition.net.write_checkpoint("transition_model", &mut ck);
        }
        ck
    }

    /// Restores parameters written by [`Agent::checkpoint`] into an agent of the same shape.
    /// Optimiser state is not restored.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        self.actor.net.read_checkpoint("actor", ck)?;
        self.actor_target.read_checkpoint("actor_target", ck)?;
        self.critic.net.read_checkpoint("critic", ck)?;
        self.critic_target.read_checkpoint("critic_target", ck)?;
        if let Some(abs) = self.abstraction.as_mut() {
            if let Some(c) = abs.critic.as_mut() {
                c.net.read_checkpoint("abstract_critic", ck)?;
            }
            if let Some(c) = abs.critic_target.as_mut() {
                c.read_checkpoint("abstract_critic_target", ck)?;
            }
            if let Some(f) = abs.state_map.as_mut() {
                f.net.read_checkpoint("state_map", ck)?;
            }
            if let Some(g) = abs.action_map.as_mut() {
                g.net.read_checkpoint("action_map", ck)?;
            }
            abs.reward_model.net.read_checkpoint("reward_model", ck)?;
            abs.transition.net.read_checkpoint("transition_model", ck)?;
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }
}

struct CriticGraph {
    actual: Var,
    abstract_critic: Option<Var>,
    lax: Option<Var>,
    model: Option<Var>,
    q: Var,
    q_bar: Option<Var>,
    critic: BoundMlp,
    abstract_critic_net: Option<BoundMlp>,
    state_map: Option<BoundMlp>,
    action_map: Option<BoundMlp>,
    reward_model: Option<BoundMlp>,
    transition: Option<BoundMlp>,
}

impl CriticGraph {
    fn losses(&self) -> Losses {
        let item = |v: &Option<Var>| v.as_ref().map_or(0.0, Var::item);
        Losses {
            actual: self.actual.item(),
            abstract_critic: item(&self.abstract_critic),
            lax: item(&self.lax),
            model: item(&self.model),
        }
    }

    fn total(&self) -> Result<Var> {
        let mut total = self.actual.clone();
        for part in [&self.abstract_critic, &self.lax, &self.model].into_iter().flatten() {
            total = total.add(part)?;
        }
        Ok(total)
    }

    fn value_equiv_error(&self) -> Option<f64> {
        let q = self.q.value();
        let q_bar = self.q_bar.as_ref()?.value();
        let (lo, hi) = q
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let mae = q.data.iter().zip(&q_bar.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / q.data.len() as f64;
        Some(mae / (hi - lo).max(1e-12))
    }
}
