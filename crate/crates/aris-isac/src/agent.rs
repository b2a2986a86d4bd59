//! DDPG trajectory learner: actor/critic multilayer perceptrons with manual
//! backpropagation, Adam, a replay buffer, Gaussian exploration, and soft
//! target updates.
//!
//! States are normalized by the map half-width before entering the
//! networks; actions leave the actor already bounded to the speed limit
//! through a scaled tanh output, never by post-hoc clamping. The critic
//! takes the normalized state concatenated with the raw action. Updates run
//! once per episode after the slot loop, and every random draw flows from a
//! single seeded generator so training is bit-reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::environment::{Environment, MdpState};
use crate::geometry::Velocity2;
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Output nonlinearity of a network.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub enum OutputKind {
    Linear,
    /// `scale * tanh(z)` per component.
    BoundedTanh { scale: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Layer {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

/// Fully connected network with rectified-linear hidden units.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    output: OutputKind,
}

/// Per-layer parameter gradients, same shapes as the network.
pub struct Gradients {
    layers: Vec<Layer>,
}

impl Gradients {
    /// Same flattening order as [`Network::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.transpose().iter());
            out.extend(l.b.iter());
        }
        out
    }
}

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<DVector<f64>>,
    /// Pre-activation of each layer.
    preacts: Vec<DVector<f64>>,
    output: DVector<f64>,
}

impl Network {
    /// Uniform fan-in initialization over the given layer sizes
    /// (input, hidden..., output).
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputKind, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need at least input and output sizes");
        let layers = dims
            .windows(2)
            .map(|d| {
                let bound = 1.0 / (d[0] as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(d[1], d[0], |_, _| rng.random_range(-bound..bound)),
                    b: DVector::from_fn(d[1], |_, _| rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        self.forward_cached(x).output
    }

    fn forward_cached(&self, x: &DVector<f64>) -> ForwardCache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut preacts = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            let z = &layer.w * &h + &layer.b;
            preacts.push(z.clone());
            h = if i + 1 < n {
                z.map(|v| v.max(0.0))
            } else {
                match self.output {
                    OutputKind::Linear => z,
                    OutputKind::BoundedTanh { scale } => z.map(|v| scale * v.tanh()),
                }
            };
        }
        ForwardCache {
            inputs,
            preacts,
            output: h,
        }
    }

    /// Backpropagate an output gradient; returns parameter gradients and
    /// the gradient with respect to the input.
    fn backward(&self, cache: &ForwardCache, dy: &DVector<f64>) -> (Gradients, DVector<f64>) {
        let n = self.layers.len();
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                b: DVector::zeros(l.b.len()),
            })
            .collect();
        let mut dz = match self.output {
            OutputKind::Linear => dy.clone(),
            OutputKind::BoundedTanh { scale } => dy.zip_map(&cache.preacts[n - 1], |g, z| {
                let t = z.tanh();
                g * scale * (1.0 - t * t)
            }),
        };
        for i in (0..n).rev() {
            grads[i].w = &dz * cache.inputs[i].transpose();
            grads[i].b = dz.clone();
            let dx = self.layers[i].w.transpose() * &dz;
            if i == 0 {
                return (Gradients { layers: grads }, dx);
            }
            dz = dx.zip_map(&cache.preacts[i - 1], |g, z| if z > 0.0 { g } else { 0.0 });
        }
        unreachable!()
    }

    /// All parameters flattened in layer order (weights row-major, then
    /// biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.transpose().iter());
            out.extend(l.b.iter());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut idx = 0;
        for l in &mut self.layers {
            let (r, c) = (l.w.nrows(), l.w.ncols());
            if idx + r * c + r > flat.len() {
                return Err(Error::ShapeMismatch("flat parameter vector too short".into()));
            }
            for i in 0..r {
                for j in 0..c {
                    l.w[(i, j)] = flat[idx + i * c + j];
                }
            }
            idx += r * c;
            l.b.copy_from_slice(&flat[idx..idx + r]);
            idx += r;
        }
        if idx != flat.len() {
            return Err(Error::ShapeMismatch("flat parameter vector too long".into()));
        }
        Ok(())
    }
}

/// Soft target update `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut Network, source: &Network, tau: f64) -> Result<()> {
    if target.layers.len() != source.layers.len() {
        return Err(Error::ShapeMismatch("network depth mismatch".into()));
    }
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        if t.w.shape() != s.w.shape() {
            return Err(Error::ShapeMismatch("layer shape mismatch".into()));
        }
        t.w = &s.w * tau + &t.w * (1.0 - tau);
        t.b = &s.b * tau + &t.b * (1.0 - tau);
    }
    Ok(())
}

/// Adam optimizer state matching one network's shapes.
struct Adam {
    lr: f64,
    t: u64,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    fn new(net: &Network, lr: f64) -> Self {
        let zeros = || -> Vec<Layer> {
            net.layers
                .iter()
                .map(|l| Layer {
                    w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                    b: DVector::zeros(l.b.len()),
                })
                .collect()
        };
        Self {
            lr,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..net.layers.len() {
            let g = &grads.layers[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            m.w = &m.w * ADAM_BETA1 + &g.w * (1.0 - ADAM_BETA1);
            m.b = &m.b * ADAM_BETA1 + &g.b * (1.0 - ADAM_BETA1);
            v.w = &v.w * ADAM_BETA2 + g.w.map(|x| x * x) * (1.0 - ADAM_BETA2);
            v.b = &v.b * ADAM_BETA2 + g.b.map(|x| x * x) * (1.0 - ADAM_BETA2);
            let l = &mut net.layers[i];
            l.w.zip_zip_apply(&m.w, &v.w, |w, mw, vw| {
                *w -= self.lr * (mw / bc1) / ((vw / bc2).sqrt() + ADAM_EPS)
            });
            l.b.zip_zip_apply(&m.b, &v.b, |b, mb, vb| {
                *b -= self.lr * (mb / bc1) / ((vb / bc2).sqrt() + ADAM_EPS)
            });
        }
    }
}

/// One stored interaction.
#[derive(Clone, Copy, Debug)]
pub struct Transition {
    pub state: MdpState,
    pub action: Velocity2,
    pub reward: f64,
    pub next_state: MdpState,
    pub done: bool,
}

/// Fixed-capacity ring of transitions, oldest evicted first.
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.entries[i]
    }

    fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        (0..batch)
            .map(|_| self.entries[rng.random_range(0..self.entries.len())])
            .collect()
    }
}

/// Learner hyperparameters.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    pub noise_std: f64,
    pub noise_decay: f64,
    pub episodes: usize,
    pub buffer_capacity: usize,
    pub updates_per_episode: usize,
    pub hidden: Vec<usize>,
    pub v_max: f64,
    pub w_max: f64,
}

impl TrainConfig {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        Self {
            gamma: cfg.discount,
            tau: cfg.soft_update,
            lr: cfg.learning_rate,
            batch: cfg.batch_size,
            noise_std: cfg.exploration_std,
            noise_decay: cfg.exploration_decay,
            episodes: cfg.episodes,
            buffer_capacity: cfg.buffer_capacity,
            updates_per_episode: cfg.updates_per_episode,
            hidden: cfg.hidden_layers.clone(),
            v_max: cfg.max_speed_mps,
            w_max: cfg.half_width_m,
        }
    }
}

/// Gaussian exploration perturbation with a hard speed clamp.
pub fn explore<R: Rng + ?Sized>(
    action: Velocity2,
    noise_std: f64,
    v_max: f64,
    rng: &mut R,
) -> Velocity2 {
    if noise_std == 0.0 {
        return Velocity2::new(action.vx.clamp(-v_max, v_max), action.vy.clamp(-v_max, v_max));
    }
    let normal = Normal::new(0.0, noise_std).expect("positive std");
    Velocity2::new(
        (action.vx + normal.sample(rng)).clamp(-v_max, v_max),
        (action.vy + normal.sample(rng)).clamp(-v_max, v_max),
    )
}

/// Critic mini-batch loss `mean (Q(x) - y)^2` and its parameter gradients.
pub fn critic_loss_and_grads(
    critic: &Network,
    batch: &[(DVector<f64>, f64)],
) -> (f64, Gradients) {
    let mut total = 0.0;
    let mut acc: Option<Gradients> = None;
    let scale = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let cache = critic.forward_cached(x);
        let q = cache.output[0];
        total += (q - y) * (q - y) * scale;
        let dy = DVector::from_element(1, 2.0 * (q - y) * scale);
        let (g, _) = critic.backward(&cache, &dy);
        acc = Some(match acc {
            None => g,
            Some(mut a) => {
                for (al, gl) in a.layers.iter_mut().zip(g.layers) {
                    al.w += gl.w;
                    al.b += gl.b;
                }
                a
            }
        });
    }
    (total, acc.expect("non-empty batch"))
}

/// Actor objective `mean Q(s, mu(s))` and the gradients of its negation
/// (so a descent step ascends the objective).
pub fn actor_objective_and_grads(
    actor: &Network,
    critic: &Network,
    states: &[DVector<f64>],
) -> (f64, Gradients) {
    let mut total = 0.0;
    let mut acc: Option<Gradients> = None;
    let scale = 1.0 / states.len() as f64;
    let sdim = actor.input_dim();
    let adim = actor.output_dim();
    for s in states {
        let a_cache = actor.forward_cached(s);
        let mut x = DVector::zeros(sdim + adim);
        x.rows_mut(0, sdim).copy_from(s);
        x.rows_mut(sdim, adim).copy_from(&a_cache.output);
        let q_cache = critic.forward_cached(&x);
        total += q_cache.output[0] * scale;
        let (_, dx) = critic.backward(&q_cache, &DVector::from_element(1, 1.0));
        // Ascend Q: descend -Q, so the gradient through the action negates.
        let da = dx.rows(sdim, adim).map(|g| -g * scale);
        let (g, _) = actor.backward(&a_cache, &da);
        acc = Some(match acc {
            None => g,
            Some(mut a) => {
                for (al, gl) in a.layers.iter_mut().zip(g.layers) {
                    al.w += gl.w;
                    al.b += gl.b;
                }
                a
            }
        });
    }
    (total, acc.expect("non-empty state list"))
}

/// Diagnostics of one [`DdpgAgent::update`] call.
#[derive(Clone, Copy, Debug)]
pub struct UpdateDiagnostics {
    pub critic_loss: f64,
    pub actor_objective: f64,
    /// False when the buffer held fewer transitions than a batch.
    pub updated: bool,
}

/// Serializable snapshot of a trained agent.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub noise_std: f64,
    pub episodes_trained: usize,
    pub v_max: f64,
    pub w_max: f64,
}

/// The DDPG learner.
pub struct DdpgAgent {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    actor_opt: Adam,
    critic_opt: Adam,
    pub buffer: ReplayBuffer,
    cfg: TrainConfig,
    noise_std: f64,
    episodes_trained: usize,
    rng: ChaCha8Rng,
}

const STATE_DIM: usize = 4;
const ACTION_DIM: usize = 2;

impl DdpgAgent {
    pub fn new(cfg: TrainConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_dims = vec![STATE_DIM];
        actor_dims.extend(&cfg.hidden);
        actor_dims.push(ACTION_DIM);
        let mut critic_dims = vec![STATE_DIM + ACTION_DIM];
        critic_dims.extend(&cfg.hidden);
        critic_dims.push(1);
        let actor = Network::new(
            &actor_dims,
            OutputKind::BoundedTanh { scale: cfg.v_max },
            &mut rng,
        );
        let critic = Network::new(&critic_dims, OutputKind::Linear, &mut rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_opt = Adam::new(&actor, cfg.lr);
        let critic_opt = Adam::new(&critic, cfg.lr);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        let noise_std = cfg.noise_std;
        Self {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt,
            critic_opt,
            buffer,
            cfg,
            noise_std,
            episodes_trained: 0,
            rng,
        }
    }

    fn features(&self, s: &MdpState) -> DVector<f64> {
        DVector::from_column_slice(&s.features(self.cfg.w_max))
    }

    /// Deterministic policy action.
    pub fn act(&self, s: &MdpState) -> Velocity2 {
        let out = self.actor.forward(&self.features(s));
        Velocity2::new(out[0], out[1])
    }

    /// TD target `y = r + gamma * Q'(s', mu'(s'))`, with no bootstrap on
    /// terminal transitions.
    pub fn td_target(&self, t: &Transition) -> f64 {
        if t.done || self.cfg.gamma == 0.0 {
            return t.reward;
        }
        let s_next = self.features(&t.next_state);
        let a_next = self.target_actor.forward(&s_next);
        let mut x = DVector::zeros(STATE_DIM + ACTION_DIM);
        x.rows_mut(0, STATE_DIM).copy_from(&s_next);
        x.rows_mut(STATE_DIM, ACTION_DIM).copy_from(&a_next);
        t.reward + self.cfg.gamma * self.target_critic.forward(&x)[0]
    }

    /// One critic and one actor gradient step on a sampled mini-batch,
    /// followed by soft target updates.
    pub fn update(&mut self) -> Result<UpdateDiagnostics> {
        if self.buffer.len() < self.cfg.batch {
            return Ok(UpdateDiagnostics {
                critic_loss: 0.0,
                actor_objective: 0.0,
                updated: false,
            });
        }
        let samples = self.buffer.sample(self.cfg.batch, &mut self.rng);
        let batch: Vec<(DVector<f64>, f64)> = samples
            .iter()
            .map(|t| {
                let mut x = DVector::zeros(STATE_DIM + ACTION_DIM);
                x.rows_mut(0, STATE_DIM).copy_from(&self.features(&t.state));
                x[STATE_DIM] = t.action.vx;
                x[STATE_DIM + 1] = t.action.vy;
                (x, self.td_target(t))
            })
            .collect();
        let (critic_loss, cg) = critic_loss_and_grads(&self.critic, &batch);
        self.critic_opt.step(&mut self.critic, &cg);

        let states: Vec<DVector<f64>> =
            samples.iter().map(|t| self.features(&t.state)).collect();
        let (actor_objective, ag) = actor_objective_and_grads(&self.actor, &self.critic, &states);
        self.actor_opt.step(&mut self.actor, &ag);

        soft_update(&mut self.target_critic, &self.critic, self.cfg.tau)?;
        soft_update(&mut self.target_actor, &self.actor, self.cfg.tau)?;
        Ok(UpdateDiagnostics {
            critic_loss,
            actor_objective,
            updated: true,
        })
    }

    /// Run the full training loop: for each episode, act with exploration
    /// noise, store transitions, then update after the slot loop.
    pub fn train(&mut self, env: &mut Environment) -> Result<Vec<f64>> {
        let mut history = Vec::with_capacity(self.cfg.episodes);
        for _ in 0..self.cfg.episodes {
            let mut state = env.reset();
            let mut total = 0.0;
            loop {
                let action = explore(self.act(&state), self.noise_std, self.cfg.v_max, &mut self.rng);
                let out = env.step(action)?;
                self.buffer.push(Transition {
                    state,
                    action,
                    reward: out.reward,
                    next_state: out.state,
                    done: out.done,
                });
                total += out.reward;
                state = out.state;
                if out.done {
                    break;
                }
            }
            for _ in 0..self.cfg.updates_per_episode {
                self.update()?;
            }
            self.noise_std *= self.cfg.noise_decay;
            self.episodes_trained += 1;
            history.push(total);
        }
        Ok(history)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            target_actor: self.target_actor.clone(),
            target_critic: self.target_critic.clone(),
            noise_std: self.noise_std,
            episodes_trained: self.episodes_trained,
            v_max: self.cfg.v_max,
            w_max: self.cfg.w_max,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.checkpoint())
            .map_err(|e| Error::Runtime(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Restore networks from a checkpoint; optimizer moments start fresh.
    pub fn load(cfg: TrainConfig, seed: u64, path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&json)
            .map_err(|e| Error::Runtime(format!("bad checkpoint: {e}")))?;
        let mut agent = Self::new(cfg, seed);
        agent.actor = ck.actor;
        agent.critic = ck.critic;
        agent.target_actor = ck.target_actor;
        agent.target_critic = ck.target_critic;
        agent.noise_std = ck.noise_std;
        agent.episodes_trained = ck.episodes_trained;
        agent.actor_opt = Adam::new(&agent.actor, agent.cfg.lr);
        agent.critic_opt = Adam::new(&agent.critic, agent.cfg.lr);
        Ok(agent)
    }

    pub fn episodes_trained(&self) -> usize {
        self.episodes_trained
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}
