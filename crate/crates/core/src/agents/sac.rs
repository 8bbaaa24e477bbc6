//! Soft actor-critic: squashed-Gaussian actor, soft Bellman critic, Polyak
//! target, entropy-regularized actor objective.

use std::io::{BufRead, Write};

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{ActionVector, Observation};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, polyak_update, read_adam, read_mlp, write_adam, write_mlp, AdamState, Gradients,
    Mlp, MlpSpec, OutputActivation,
};

use super::policy::{GaussianPolicy, PolicyAdam, PolicyGradients};
use super::{gather_batch, Agent, ReplayBuffer, Transition};

/// Hyperparameters of one SAC learner.
#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub hidden_width: usize,
    pub entropy_temp: f64,
    pub discount: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub warmup: usize,
    pub buffer_capacity: usize,
    pub twin_critic: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden_width: 256,
            entropy_temp: 0.2,
            discount: 0.99,
            tau: 1e-3,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 128,
            warmup: 1000,
            buffer_capacity: 1_000_000,
            twin_critic: false,
        }
    }
}

fn critic_spec(obs_dim: usize, action_dim: usize, hidden: usize) -> MlpSpec {
    MlpSpec::new(
        vec![obs_dim + action_dim, hidden, hidden, 1],
        OutputActivation::Linear,
    )
    .expect("sizes")
}

pub(crate) fn concat_columns(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

/// Squared-residual critic loss against fixed targets, with gradients.
pub fn critic_loss_and_grads(
    critic: &Mlp,
    input: &Array2<f64>,
    targets: &Array1<f64>,
) -> Result<(f64, Gradients)> {
    let batch = input.nrows() as f64;
    let (q, tape) = critic.forward(input)?;
    let mut loss = 0.0;
    let mut dq = Array2::zeros((input.nrows(), 1));
    for row in 0..input.nrows() {
        let diff = q[(row, 0)] - targets[row];
        loss += diff * diff;
        dq[(row, 0)] = 2.0 * diff / batch;
    }
    let (grads, _) = critic.backward(&tape, &dq)?;
    Ok((loss / batch, grads))
}

/// Entropy-regularized actor loss `mean(T·logπ − Q(s, a))` with exact
/// reparameterized gradients; the critic parameters stay fixed, only the
/// action input carries gradient.
pub fn actor_loss_and_grads(
    policy: &GaussianPolicy,
    critic: &Mlp,
    critic2: Option<&Mlp>,
    obs: &Array2<f64>,
    noise: &Array2<f64>,
    entropy_temp: f64,
) -> Result<(f64, PolicyGradients)> {
    let batch = obs.nrows();
    let b = batch as f64;
    let eval = policy.eval(obs, noise.clone())?;
    let critic_in = concat_columns(obs, &eval.action);
    let (q1, tape1) = critic.forward(&critic_in)?;
    let (q_used, d_in) = match critic2 {
        None => {
            let mut dq = Array2::zeros((batch, 1));
            dq.fill(-1.0 / b);
            let (_, d_in) = critic.backward(&tape1, &dq)?;
            (q1.column(0).to_owned(), d_in)
        }
        Some(c2) => {
            let (q2, tape2) = c2.forward(&critic_in)?;
            let mut dq1 = Array2::zeros((batch, 1));
            let mut dq2 = Array2::zeros((batch, 1));
            let mut q_used = Array1::zeros(batch);
            for row in 0..batch {
                if q1[(row, 0)] <= q2[(row, 0)] {
                    q_used[row] = q1[(row, 0)];
                    dq1[(row, 0)] = -1.0 / b;
                } else {
                    q_used[row] = q2[(row, 0)];
                    dq2[(row, 0)] = -1.0 / b;
                }
            }
            let (_, d1) = critic.backward(&tape1, &dq1)?;
            let (_, d2) = c2.backward(&tape2, &dq2)?;
            (q_used, d1 + d2)
        }
    };

    let obs_dim = obs.ncols();
    let d_action_from_q = d_in.slice(s![.., obs_dim..]).to_owned();

    let mut loss = 0.0;
    for row in 0..batch {
        loss += entropy_temp * eval.log_prob[row] - q_used[row];
    }
    loss /= b;

    // dL/du combines the entropy term ∂logπ/∂u = 2·tanh(u) with the Q path
    // through a = tanh(u).
    let scale = entropy_temp / b;
    let mut d_u = Array2::zeros(eval.action.dim());
    ndarray::Zip::from(&mut d_u)
        .and(&eval.action)
        .and(&d_action_from_q)
        .for_each(|du, &a, &dq| {
            *du = scale * 2.0 * a + dq * (1.0 - a * a);
        });
    // dL/dμ = dL/du; dL/dσ adds the −1/σ entropy term and the ε chain.
    let d_mean = d_u.clone();
    let mut d_std = Array2::zeros(eval.std.dim());
    ndarray::Zip::from(&mut d_std)
        .and(&eval.std)
        .and(&d_u)
        .and(&eval.noise)
        .for_each(|ds, &sigma, &du, &eps| {
            *ds = scale * (-1.0 / sigma) + du * eps;
        });

    let grads = policy.backward(&eval, &d_mean, &d_std)?;
    Ok((loss, grads))
}

/// SAC learner with a single (optionally twin) critic and Polyak targets.
#[derive(Debug)]
pub struct SacAgent {
    obs_dim: usize,
    action_dim: usize,
    cfg: SacConfig,
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub critic2: Option<Mlp>,
    pub target_critic2: Option<Mlp>,
    policy_adam: PolicyAdam,
    critic_adam: AdamState,
    critic2_adam: Option<AdamState>,
    buffer: ReplayBuffer,
    rng: ChaCha12Rng,
}

impl SacAgent {
    pub fn new(obs_dim: usize, action_dim: usize, cfg: SacConfig, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let policy = GaussianPolicy::new(obs_dim, action_dim, cfg.hidden_width, &mut rng);
        let critic = Mlp::new(critic_spec(obs_dim, action_dim, cfg.hidden_width), &mut rng);
        let target_critic = critic.clone();
        let (critic2, target_critic2, critic2_adam) = if cfg.twin_critic {
            let c2 = Mlp::new(critic_spec(obs_dim, action_dim, cfg.hidden_width), &mut rng);
            let adam = AdamState::new(&c2, cfg.critic_lr);
            (Some(c2.clone()), Some(c2), Some(adam))
        } else {
            (None, None, None)
        };
        let policy_adam = policy.adam(cfg.actor_lr);
        let critic_adam = AdamState::new(&critic, cfg.critic_lr);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Self {
            obs_dim,
            action_dim,
            cfg,
            policy,
            critic,
            target_critic,
            critic2,
            target_critic2,
            policy_adam,
            critic_adam,
            critic2_adam,
            buffer,
            rng,
        }
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Draw an action and its log-probability from the current policy.
    pub fn sample_action(
        &mut self,
        obs: &Observation,
        deterministic: bool,
    ) -> Result<(ActionVector, f64)> {
        self.policy.sample(obs, deterministic, &mut self.rng)
    }

    fn normal_noise(&mut self, rows: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, self.action_dim), |_| {
            StandardNormal.sample(&mut self.rng)
        })
    }

    /// Soft Bellman targets `r + γ(1-done)·[Q̄(s', a') − T·logπ(a'|s')]`
    /// with `a'` freshly sampled from the current policy.
    fn soft_targets(
        &mut self,
        rewards: &Array1<f64>,
        dones: &Array1<f64>,
        next_states: &Array2<f64>,
    ) -> Result<Array1<f64>> {
        let noise = self.normal_noise(next_states.nrows());
        let eval = self.policy.eval(next_states, noise)?;
        let next_in = concat_columns(next_states, &eval.action);
        let (q1, _) = self.target_critic.forward(&next_in)?;
        let mut q_next = q1.column(0).to_owned();
        if let Some(t2) = &self.target_critic2 {
            let (q2, _) = t2.forward(&next_in)?;
            for row in 0..q_next.len() {
                q_next[row] = q_next[row].min(q2[(row, 0)]);
            }
        }
        let gamma = self.cfg.discount;
        let temp = self.cfg.entropy_temp;
        let mut targets = Array1::zeros(rewards.len());
        for row in 0..rewards.len() {
            let bracket = q_next[row] - temp * eval.log_prob[row];
            targets[row] = rewards[row] + gamma * (1.0 - dones[row]) * bracket;
        }
        Ok(targets)
    }

    /// Soft target value for a single transition.
    pub fn soft_target(&mut self, transition: &Transition) -> Result<f64> {
        let rewards = Array1::from(vec![transition.reward]);
        let dones = Array1::from(vec![if transition.done { 1.0 } else { 0.0 }]);
        let next = transition.next_state.clone().insert_axis(Axis(0));
        Ok(self.soft_targets(&rewards, &dones, &next)?[0])
    }

    /// One critic step on a batch: soft Bellman residual, Adam, Polyak.
    pub fn critic_update(&mut self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let batch = gather_batch(&self.buffer, indices, self.obs_dim, self.action_dim);
        let targets = self.soft_targets(&batch.rewards, &batch.dones, &batch.next_states)?;
        let input = concat_columns(&batch.states, &batch.actions);
        let (loss1, grads1) = critic_loss_and_grads(&self.critic, &input, &targets)?;
        adam_step(&mut self.critic, &grads1, &mut self.critic_adam);
        let mut loss = loss1;
        if let (Some(c2), Some(adam2)) = (self.critic2.as_mut(), self.critic2_adam.as_mut()) {
            let (loss2, grads2) = critic_loss_and_grads(c2, &input, &targets)?;
            adam_step(c2, &grads2, adam2);
            loss = 0.5 * (loss1 + loss2);
        }
        polyak_update(&mut self.target_critic, &self.critic, self.cfg.tau);
        if let (Some(t2), Some(c2)) = (self.target_critic2.as_mut(), self.critic2.as_ref()) {
            polyak_update(t2, c2, self.cfg.tau);
        }
        Ok(loss)
    }

    /// One actor step on a batch: entropy-regularized objective, Adam.
    pub fn actor_update(&mut self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let batch = gather_batch(&self.buffer, indices, self.obs_dim, self.action_dim);
        let noise = self.normal_noise(batch.states.nrows());
        let (loss, grads) = actor_loss_and_grads(
            &self.policy,
            &self.critic,
            self.critic2.as_ref(),
            &batch.states,
            &noise,
            self.cfg.entropy_temp,
        )?;
        self.apply_policy_grads(&grads);
        Ok(loss)
    }

    fn apply_policy_grads(&mut self, grads: &PolicyGradients) {
        adam_step(
            &mut self.policy.trunk,
            &grads.trunk,
            &mut self.policy_adam.trunk,
        );
        adam_step(
            &mut self.policy.mean_head,
            &grads.mean_head,
            &mut self.policy_adam.mean_head,
        );
        adam_step(
            &mut self.policy.std_head,
            &grads.std_head,
            &mut self.policy_adam.std_head,
        );
    }

    // ── Checkpointing ──────────────────────────────────────────────────

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "mmwnoma-checkpoint v1")?;
        writeln!(w, "agent sac")?;
        writeln!(w, "obs_dim {}", self.obs_dim)?;
        writeln!(w, "action_dim {}", self.action_dim)?;
        writeln!(w, "hidden_width {}", self.cfg.hidden_width)?;
        writeln!(w, "entropy_temp {:016x}", self.cfg.entropy_temp.to_bits())?;
        writeln!(w, "discount {:016x}", self.cfg.discount.to_bits())?;
        writeln!(w, "tau {:016x}", self.cfg.tau.to_bits())?;
        writeln!(w, "actor_lr {:016x}", self.cfg.actor_lr.to_bits())?;
        writeln!(w, "critic_lr {:016x}", self.cfg.critic_lr.to_bits())?;
        writeln!(w, "batch_size {}", self.cfg.batch_size)?;
        writeln!(w, "warmup {}", self.cfg.warmup)?;
        writeln!(w, "buffer_capacity {}", self.cfg.buffer_capacity)?;
        writeln!(w, "twin_critic {}", u8::from(self.cfg.twin_critic))?;
        write_mlp(w, "actor_trunk", &self.policy.trunk)?;
        write_mlp(w, "actor_mean", &self.policy.mean_head)?;
        write_mlp(w, "actor_std", &self.policy.std_head)?;
        write_mlp(w, "critic", &self.critic)?;
        write_mlp(w, "target_critic", &self.target_critic)?;
        if let (Some(c2), Some(t2)) = (&self.critic2, &self.target_critic2) {
            write_mlp(w, "critic2", c2)?;
            write_mlp(w, "target_critic2", t2)?;
        }
        write_adam(w, "actor_trunk", &self.policy_adam.trunk)?;
        write_adam(w, "actor_mean", &self.policy_adam.mean_head)?;
        write_adam(w, "actor_std", &self.policy_adam.std_head)?;
        write_adam(w, "critic", &self.critic_adam)?;
        if let Some(adam2) = &self.critic2_adam {
            write_adam(w, "critic2", adam2)?;
        }
        Ok(())
    }

    /// Restore a checkpoint written by [`SacAgent::save`]. The replay buffer
    /// starts empty and the action-noise stream is reseeded from `seed`.
    pub fn load<R: BufRead>(reader: R, seed: u64) -> Result<Self> {
        let mut lines = reader.lines();
        let mut next = || -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::Io(e)),
                None => Err(Error::Checkpoint("unexpected end of file".into())),
            }
        };
        let magic = next()?;
        if magic != "mmwnoma-checkpoint v1" {
            return Err(Error::Checkpoint(format!("bad magic line `{magic}`")));
        }
        let agent_line = next()?;
        if agent_line != "agent sac" {
            return Err(Error::Checkpoint(format!(
                "expected `agent sac`, found `{agent_line}`"
            )));
        }
        fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::Checkpoint(format!("expected `{key}`: {line}")))?;
            rest.trim()
                .parse::<T>()
                .map_err(|_| Error::Checkpoint(format!("bad value for `{key}`: {line}")))
        }
        fn hex_field(line: &str, key: &str) -> Result<f64> {
            let raw: String = field(line, key)?;
            u64::from_str_radix(&raw, 16)
                .map(f64::from_bits)
                .map_err(|e| Error::Checkpoint(format!("bad hex for `{key}`: {e}")))
        }
        let obs_dim: usize = field(&next()?, "obs_dim")?;
        let action_dim: usize = field(&next()?, "action_dim")?;
        let hidden_width: usize = field(&next()?, "hidden_width")?;
        let entropy_temp = hex_field(&next()?, "entropy_temp")?;
        let discount = hex_field(&next()?, "discount")?;
        let tau = hex_field(&next()?, "tau")?;
        let actor_lr = hex_field(&next()?, "actor_lr")?;
        let critic_lr = hex_field(&next()?, "critic_lr")?;
        let batch_size: usize = field(&next()?, "batch_size")?;
        let warmup: usize = field(&next()?, "warmup")?;
        let buffer_capacity: usize = field(&next()?, "buffer_capacity")?;
        let twin_critic: u8 = field(&next()?, "twin_critic")?;
        let cfg = SacConfig {
            hidden_width,
            entropy_temp,
            discount,
            tau,
            actor_lr,
            critic_lr,
            batch_size,
            warmup,
            buffer_capacity,
            twin_critic: twin_critic != 0,
        };
        let trunk = read_mlp(&mut lines, "actor_trunk")?;
        let mean_head = read_mlp(&mut lines, "actor_mean")?;
        let std_head = read_mlp(&mut lines, "actor_std")?;
        let critic = read_mlp(&mut lines, "critic")?;
        let target_critic = read_mlp(&mut lines, "target_critic")?;
        let (critic2, target_critic2) = if cfg.twin_critic {
            (
                Some(read_mlp(&mut lines, "critic2")?),
                Some(read_mlp(&mut lines, "target_critic2")?),
            )
        } else {
            (None, None)
        };
        let policy = GaussianPolicy {
            trunk,
            mean_head,
            std_head,
        };
        if policy.obs_dim() != obs_dim || policy.action_dim() != action_dim {
            return Err(Error::CheckpointMismatch(format!(
                "actor dims ({}, {}) disagree with header ({obs_dim}, {action_dim})",
                policy.obs_dim(),
                policy.action_dim()
            )));
        }
        let policy_adam = PolicyAdam {
            trunk: read_adam(&mut lines, "actor_trunk", &policy.trunk)?,
            mean_head: read_adam(&mut lines, "actor_mean", &policy.mean_head)?,
            std_head: read_adam(&mut lines, "actor_std", &policy.std_head)?,
        };
        let critic_adam = read_adam(&mut lines, "critic", &critic)?;
        let critic2_adam = match &critic2 {
            Some(c2) => Some(read_adam(&mut lines, "critic2", c2)?),
            None => None,
        };
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Self {
            obs_dim,
            action_dim,
            cfg,
            policy,
            critic,
            target_critic,
            critic2,
            target_critic2,
            policy_adam,
            critic_adam,
            critic2_adam,
            buffer,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }
}

impl Agent for SacAgent {
    fn act(&mut self, obs: &Observation, deterministic: bool) -> ActionVector {
        let (action, _) = self
            .policy
            .sample(obs, deterministic, &mut self.rng)
            .expect("observation length matches the policy input");
        action
    }

    fn record(&mut self, transition: Transition) {
        assert_eq!(transition.state.len(), self.obs_dim, "state length");
        assert_eq!(transition.action.len(), self.action_dim, "action length");
        assert_eq!(
            transition.next_state.len(),
            self.obs_dim,
            "next state length"
        );
        self.buffer.push(transition);
    }

    fn warmed_up(&self) -> bool {
        self.buffer.len() >= self.cfg.warmup.max(self.cfg.batch_size)
    }

    fn update(&mut self) -> Result<()> {
        let indices = self
            .buffer
            .sample_indices(&mut self.rng, self.cfg.batch_size);
        self.critic_update(&indices)?;
        self.actor_update(&indices)?;
        Ok(())
    }

    fn save_checkpoint(&self, mut w: &mut dyn Write) -> Result<()> {
        self.save(&mut w)
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }
}
