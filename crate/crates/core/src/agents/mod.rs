//! Off-policy continuous-control agents: the soft actor-critic learner and a
//! deterministic-policy (DDPG) reference, sharing a ring replay buffer and a
//! common interaction loop.

mod ddpg;
mod policy;
mod sac;

pub use ddpg::{ddpg_actor_loss_and_grads, DdpgAgent, DdpgConfig};
pub use policy::{DeterministicPolicy, GaussianPolicy, PolicyGradients};
pub use sac::{actor_loss_and_grads, critic_loss_and_grads, SacAgent, SacConfig};

use std::io::Write;

use ndarray::{Array1, Array2};

use crate::env::{ActionVector, NomaEnv, Observation};
use crate::error::{Error, Result};

/// One step of experience for replay.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Observation,
    pub action: ActionVector,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

/// Fixed-capacity ring buffer; once full, each push overwrites the oldest
/// transition. Backing storage grows lazily up to the capacity.
#[derive(Debug)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            storage: Vec::new(),
            capacity,
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.storage[index]
    }

    /// Uniform sample of `batch_size` indices (with replacement).
    pub fn sample_indices<R: rand::Rng>(&self, rng: &mut R, batch_size: usize) -> Vec<usize> {
        (0..batch_size)
            .map(|_| rng.random_range(0..self.storage.len()))
            .collect()
    }
}

fn stack<F>(buffer: &ReplayBuffer, indices: &[usize], dim: usize, f: F) -> Array2<f64>
where
    F: Fn(&Transition) -> &Array1<f64>,
{
    let mut out = Array2::zeros((indices.len(), dim));
    for (row, &i) in indices.iter().enumerate() {
        out.row_mut(row).assign(f(buffer.get(i)));
    }
    out
}

/// A replay batch in matrix form, rows indexed by sample.
pub(crate) struct BatchArrays {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

pub(crate) fn gather_batch(
    buffer: &ReplayBuffer,
    indices: &[usize],
    obs_dim: usize,
    action_dim: usize,
) -> BatchArrays {
    BatchArrays {
        states: stack(buffer, indices, obs_dim, |t| &t.state),
        actions: stack(buffer, indices, action_dim, |t| &t.action),
        rewards: Array1::from_iter(indices.iter().map(|&i| buffer.get(i).reward)),
        next_states: stack(buffer, indices, obs_dim, |t| &t.next_state),
        dones: Array1::from_iter(
            indices
                .iter()
                .map(|&i| if buffer.get(i).done { 1.0 } else { 0.0 }),
        ),
    }
}

/// Common surface the training loop drives.
pub trait Agent {
    /// Choose an action: stochastic/exploring when `deterministic` is false,
    /// the policy mean (or noise-free policy) when true.
    fn act(&mut self, obs: &Observation, deterministic: bool) -> ActionVector;

    /// Store one transition in the replay buffer.
    fn record(&mut self, transition: Transition);

    /// Whether enough experience has accumulated to start updating.
    fn warmed_up(&self) -> bool;

    /// One critic update plus one actor update on a fresh batch.
    fn update(&mut self) -> Result<()>;

    /// Serialize networks and optimizer state as a checkpoint.
    fn save_checkpoint(&self, w: &mut dyn Write) -> Result<()>;

    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
}

/// One learning-curve point: per-episode mean immediate reward and the
/// trailing moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_reward: f64,
    pub moving_avg: f64,
}

/// Per-episode rewards of one training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// Build from raw per-episode means; the moving average at episode `e`
    /// spans episodes `max(1, e - len + 1) ..= e` (1-indexed).
    pub fn from_episode_means(means: &[f64], moving_avg_len: usize) -> Self {
        let mut points = Vec::with_capacity(means.len());
        for (i, &mean) in means.iter().enumerate() {
            let lo = (i + 1).saturating_sub(moving_avg_len);
            let window = &means[lo..=i];
            let avg = window.iter().sum::<f64>() / window.len() as f64;
            points.push(CurvePoint {
                episode: i + 1,
                mean_reward: mean,
                moving_avg: avg,
            });
        }
        Self { points }
    }

    pub fn final_moving_avg(&self) -> Option<f64> {
        self.points.last().map(|p| p.moving_avg)
    }

    /// First episode whose moving average reaches `threshold`, if any.
    pub fn episodes_to_reach(&self, threshold: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.moving_avg >= threshold)
            .map(|p| p.episode)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "episode,mean_reward,moving_avg_25")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.episode, p.mean_reward, p.moving_avg)?;
        }
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::MalformedCsv {
            line: 1,
            reason: "empty file".into(),
        })?;
        if header != "episode,mean_reward,moving_avg_25" {
            return Err(Error::MalformedCsv {
                line: 1,
                reason: format!("unexpected header `{header}`"),
            });
        }
        let mut points = Vec::new();
        for (i, line) in lines {
            let mut fields = line.split(',');
            let mut field = |name: &str| {
                fields.next().ok_or(Error::MalformedCsv {
                    line: i + 1,
                    reason: format!("missing field {name}"),
                })
            };
            let episode = field("episode")?
                .parse::<usize>()
                .map_err(|e| Error::MalformedCsv {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            let mean_reward = field("mean_reward")?
                .parse::<f64>()
                .map_err(|e| Error::MalformedCsv {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            let moving_avg = field("moving_avg_25")?
                .parse::<f64>()
                .map_err(|e| Error::MalformedCsv {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            points.push(CurvePoint {
                episode,
                mean_reward,
                moving_avg,
            });
        }
        Ok(Self { points })
    }
}

/// Standard interaction loop: act, store, update once per environment step
/// after warmup. Deterministic given the seeds the agent and environment
/// were constructed with.
pub fn train<A: Agent + ?Sized>(
    agent: &mut A,
    env: &mut NomaEnv,
    episodes: usize,
    moving_avg_len: usize,
) -> Result<LearningCurve> {
    let steps_per_episode = env.config().steps_per_episode;
    let mut means = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut reward_sum = 0.0;
        for _ in 0..steps_per_episode {
            let action = agent.act(&obs, false);
            let out = env.step(&action)?;
            reward_sum += out.reward;
            agent.record(Transition {
                state: obs,
                action,
                reward: out.reward,
                next_state: out.observation.clone(),
                done: out.done,
            });
            if agent.warmed_up() {
                agent.update()?;
            }
            obs = out.observation;
        }
        means.push(reward_sum / steps_per_episode as f64);
    }
    Ok(LearningCurve::from_episode_means(&means, moving_avg_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    fn dummy_transition(tag: f64) -> Transition {
        Transition {
            state: arr1(&[tag, 0.0]),
            action: arr1(&[0.0]),
            reward: tag,
            next_state: arr1(&[tag, 1.0]),
            done: false,
        }
    }

    #[test]
    fn ring_buffer_overwrites_oldest_first() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..6 {
            buf.push(dummy_transition(i as f64));
        }
        assert_eq!(buf.len(), 4);
        let rewards: Vec<f64> = (0..4).map(|i| buf.get(i).reward).collect();
        // Slots 0 and 1 were overwritten by 4 and 5; 2 and 3 survive.
        let mut sorted = rewards.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn ring_buffer_never_exceeds_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..50 {
            buf.push(dummy_transition(i as f64));
            assert!(buf.len() <= 3);
        }
    }

    #[test]
    fn moving_average_window_matches_spec() {
        let means: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let curve = LearningCurve::from_episode_means(&means, 25);
        // Episode 10: average of episodes 1..=10.
        assert_eq!(curve.points[9].moving_avg, 5.5);
        // Episode 30: average of episodes 6..=30.
        let expect: f64 = (6..=30).sum::<usize>() as f64 / 25.0;
        assert_eq!(curve.points[29].moving_avg, expect);
        assert_eq!(curve.points[29].episode, 30);
    }

    #[test]
    fn curve_csv_round_trips() {
        let curve = LearningCurve::from_episode_means(&[1.0, 2.5, 0.125], 25);
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let parsed = LearningCurve::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(curve, parsed);
    }

    #[test]
    fn curve_csv_rejects_bad_header() {
        assert!(LearningCurve::parse_csv("nope\n1,2,3\n").is_err());
    }

    #[test]
    fn episodes_to_reach_finds_first_crossing() {
        let curve = LearningCurve::from_episode_means(&[0.0, 4.0, 8.0, 8.0], 1);
        assert_eq!(curve.episodes_to_reach(4.0), Some(2));
        assert_eq!(curve.episodes_to_reach(100.0), None);
    }
}
