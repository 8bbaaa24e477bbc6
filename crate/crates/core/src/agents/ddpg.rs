//! Deterministic-policy comparison agent: tanh actor, bootstrapped critic
//! with target actor/critic pair, additive Gaussian exploration noise.

use std::io::{BufRead, Write};

use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{ActionVector, Observation};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, polyak_update, read_adam, read_mlp, write_adam, write_mlp, AdamState, Gradients,
    Mlp, MlpSpec, OutputActivation,
};

use super::policy::{DeterministicAdam, DeterministicPolicy};
use super::sac::{concat_columns, critic_loss_and_grads};
use super::{gather_batch, Agent, ReplayBuffer, Transition};

/// Hyperparameters of one DDPG learner.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub hidden_width: usize,
    pub discount: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub warmup: usize,
    pub buffer_capacity: usize,
    /// Std of the additive exploration noise on actions.
    pub explore_noise: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden_width: 256,
            discount: 0.99,
            tau: 1e-3,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch_size: 128,
            warmup: 1000,
            buffer_capacity: 1_000_000,
            explore_noise: 0.1,
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

/// Deterministic-policy objective `-mean Q(s, π(s))` with gradients flowing
/// through the action input only.
pub fn ddpg_actor_loss_and_grads(
    actor: &DeterministicPolicy,
    critic: &Mlp,
    obs: &Array2<f64>,
) -> Result<(f64, (Gradients, Gradients))> {
    let batch = obs.nrows();
    let b = batch as f64;
    let (action, trunk_tape, head_tape) = actor.forward(obs)?;
    let critic_in = concat_columns(obs, &action);
    let (q, q_tape) = critic.forward(&critic_in)?;
    let loss = -q.column(0).sum() / b;
    let mut dq = Array2::zeros((batch, 1));
    dq.fill(-1.0 / b);
    let (_, d_in) = critic.backward(&q_tape, &dq)?;
    let d_action = d_in.slice(s![.., obs.ncols()..]).to_owned();
    let grads = actor.backward(&trunk_tape, &head_tape, &d_action)?;
    Ok((loss, grads))
}

/// DDPG learner.
#[derive(Debug)]
pub struct DdpgAgent {
    obs_dim: usize,
    action_dim: usize,
    cfg: DdpgConfig,
    pub actor: DeterministicPolicy,
    pub critic: Mlp,
    pub target_actor: DeterministicPolicy,
    pub target_critic: Mlp,
    actor_adam: DeterministicAdam,
    critic_adam: AdamState,
    buffer: ReplayBuffer,
    rng: ChaCha12Rng,
}

impl DdpgAgent {
    pub fn new(obs_dim: usize, action_dim: usize, cfg: DdpgConfig, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let actor = DeterministicPolicy::new(obs_dim, action_dim, cfg.hidden_width, &mut rng);
        let critic = Mlp::new(critic_spec(obs_dim, action_dim, cfg.hidden_width), &mut rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_adam = actor.adam(cfg.actor_lr);
        let critic_adam = AdamState::new(&critic, cfg.critic_lr);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Self {
            obs_dim,
            action_dim,
            cfg,
            actor,
            critic,
            target_actor,
            target_critic,
            actor_adam,
            critic_adam,
            buffer,
            rng,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    /// One critic step and one actor step on the given batch; returns
    /// `(critic_loss, actor_loss)`.
    pub fn ddpg_update(&mut self, indices: &[usize]) -> Result<(f64, f64)> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let batch = gather_batch(&self.buffer, indices, self.obs_dim, self.action_dim);

        // Bootstrapped targets from the target actor/critic pair.
        let (next_actions, _, _) = self.target_actor.forward(&batch.next_states)?;
        let next_in = concat_columns(&batch.next_states, &next_actions);
        let (q_next, _) = self.target_critic.forward(&next_in)?;
        let gamma = self.cfg.discount;
        let targets = ndarray::Array1::from_iter((0..indices.len()).map(|row| {
            batch.rewards[row] + gamma * (1.0 - batch.dones[row]) * q_next[(row, 0)]
        }));
        let input = concat_columns(&batch.states, &batch.actions);
        let (critic_loss, critic_grads) = critic_loss_and_grads(&self.critic, &input, &targets)?;
        adam_step(&mut self.critic, &critic_grads, &mut self.critic_adam);

        let (actor_loss, (trunk_grads, head_grads)) =
            ddpg_actor_loss_and_grads(&self.actor, &self.critic, &batch.states)?;
        adam_step(&mut self.actor.trunk, &trunk_grads, &mut self.actor_adam.trunk);
        adam_step(&mut self.actor.head, &head_grads, &mut self.actor_adam.head);

        polyak_update(&mut self.target_critic, &self.critic, self.cfg.tau);
        polyak_update(&mut self.target_actor.trunk, &self.actor.trunk, self.cfg.tau);
        polyak_update(&mut self.target_actor.head, &self.actor.head, self.cfg.tau);
        Ok((critic_loss, actor_loss))
    }

    // ── Checkpointing ──────────────────────────────────────────────────

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "mmwnoma-checkpoint v1")?;
        writeln!(w, "agent ddpg")?;
        writeln!(w, "obs_dim {}", self.obs_dim)?;
        writeln!(w, "action_dim {}", self.action_dim)?;
        writeln!(w, "hidden_width {}", self.cfg.hidden_width)?;
        writeln!(w, "discount {:016x}", self.cfg.discount.to_bits())?;
        writeln!(w, "tau {:016x}", self.cfg.tau.to_bits())?;
        writeln!(w, "actor_lr {:016x}", self.cfg.actor_lr.to_bits())?;
        writeln!(w, "critic_lr {:016x}", self.cfg.critic_lr.to_bits())?;
        writeln!(w, "batch_size {}", self.cfg.batch_size)?;
        writeln!(w, "warmup {}", self.cfg.warmup)?;
        writeln!(w, "buffer_capacity {}", self.cfg.buffer_capacity)?;
        writeln!(w, "explore_noise {:016x}", self.cfg.explore_noise.to_bits())?;
        write_mlp(w, "actor_trunk", &self.actor.trunk)?;
        write_mlp(w, "actor_head", &self.actor.head)?;
        write_mlp(w, "critic", &self.critic)?;
        write_mlp(w, "target_actor_trunk", &self.target_actor.trunk)?;
        write_mlp(w, "target_actor_head", &self.target_actor.head)?;
        write_mlp(w, "target_critic", &self.target_critic)?;
        write_adam(w, "actor_trunk", &self.actor_adam.trunk)?;
        write_adam(w, "actor_head", &self.actor_adam.head)?;
        write_adam(w, "critic", &self.critic_adam)?;
        Ok(())
    }

    /// Restore a checkpoint written by [`DdpgAgent::save`].
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
        if agent_line != "agent ddpg" {
            return Err(Error::Checkpoint(format!(
                "expected `agent ddpg`, found `{agent_line}`"
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
        let discount = hex_field(&next()?, "discount")?;
        let tau = hex_field(&next()?, "tau")?;
        let actor_lr = hex_field(&next()?, "actor_lr")?;
        let critic_lr = hex_field(&next()?, "critic_lr")?;
        let batch_size: usize = field(&next()?, "batch_size")?;
        let warmup: usize = field(&next()?, "warmup")?;
        let buffer_capacity: usize = field(&next()?, "buffer_capacity")?;
        let explore_noise = hex_field(&next()?, "explore_noise")?;
        let cfg = DdpgConfig {
            hidden_width,
            discount,
            tau,
            actor_lr,
            critic_lr,
            batch_size,
            warmup,
            buffer_capacity,
            explore_noise,
        };
        let actor = DeterministicPolicy {
            trunk: read_mlp(&mut lines, "actor_trunk")?,
            head: read_mlp(&mut lines, "actor_head")?,
        };
        let critic = read_mlp(&mut lines, "critic")?;
        let target_actor = DeterministicPolicy {
            trunk: read_mlp(&mut lines, "target_actor_trunk")?,
            head: read_mlp(&mut lines, "target_actor_head")?,
        };
        let target_critic = read_mlp(&mut lines, "target_critic")?;
        if actor.obs_dim() != obs_dim || actor.action_dim() != action_dim {
            return Err(Error::CheckpointMismatch(format!(
                "actor dims ({}, {}) disagree with header ({obs_dim}, {action_dim})",
                actor.obs_dim(),
                actor.action_dim()
            )));
        }
        let actor_adam = DeterministicAdam {
            trunk: read_adam(&mut lines, "actor_trunk", &actor.trunk)?,
            head: read_adam(&mut lines, "actor_head", &actor.head)?,
        };
        let critic_adam = read_adam(&mut lines, "critic", &critic)?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Self {
            obs_dim,
            action_dim,
            cfg,
            actor,
            critic,
            target_actor,
            target_critic,
            actor_adam,
            critic_adam,
            buffer,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }
}

impl Agent for DdpgAgent {
    fn act(&mut self, obs: &Observation, deterministic: bool) -> ActionVector {
        let batch = obs.clone().insert_axis(Axis(0));
        let (action, _, _) = self
            .actor
            .forward(&batch)
            .expect("observation length matches the actor input");
        let mut a = action.remove_axis(Axis(0));
        if !deterministic && self.cfg.explore_noise > 0.0 {
            let sigma = self.cfg.explore_noise;
            a.mapv_inplace(|v| {
                let eps: f64 = StandardNormal.sample(&mut self.rng);
                (v + sigma * eps).clamp(-1.0, 1.0)
            });
        }
        a
    }

    fn record(&mut self, transition: Transition) {
        assert_eq!(transition.state.len(), self.obs_dim, "state length");
        assert_eq!(transition.action.len(), self.action_dim, "action length");
        self.buffer.push(transition);
    }

    fn warmed_up(&self) -> bool {
        self.buffer.len() >= self.cfg.warmup.max(self.cfg.batch_size)
    }

    fn update(&mut self) -> Result<()> {
        let indices = self
            .buffer
            .sample_indices(&mut self.rng, self.cfg.batch_size);
        self.ddpg_update(&indices)?;
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
