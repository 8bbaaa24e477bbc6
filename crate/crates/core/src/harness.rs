//! Experiment orchestration: flat key=value configs with two built-in
//! profiles, seeded training runs, deterministic-policy evaluation, the four
//! parameter sweeps, and CSV reporting.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::agents::{train, Agent, DdpgAgent, DdpgConfig, LearningCurve, SacAgent, SacConfig};
use crate::baselines::{strongest_path_noma, tdma_sum_rate};
use crate::channel::ChannelModel;
use crate::env::{
    compute_reward, decode_action, encode_state, AlphaMode, EnvConfig, NomaEnv,
};
use crate::error::{Error, Result};
use crate::phy::rate_report;

/// Which learner a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sac,
    Ddpg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sac => "sac",
            Self::Ddpg => "ddpg",
        }
    }
}

/// Swept system parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    SnrDb,
    NUsers,
    MinRate,
    NAntennas,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::NUsers => "n_users",
            Self::MinRate => "min_rate",
            Self::NAntennas => "n_antennas",
        }
    }
}

/// Sweep descriptor: one parameter and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Reference grids for each sweep parameter.
pub fn default_sweep_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::SnrDb => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        SweepParam::NUsers => vec![2.0, 4.0, 6.0, 8.0],
        SweepParam::MinRate => vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
        SweepParam::NAntennas => vec![16.0, 32.0, 64.0],
    }
}

/// Full experiment description: system dimensions, agent hyperparameters,
/// and run settings. `Default` reproduces the reference hyperparameters
/// (γ = 0.99, 100 episodes, moving average 25, learning rates 1e-3, buffer
/// 1e6, τ = 1e-3).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // System model.
    pub n_users: usize,
    pub n_antennas: usize,
    pub power_budget: f64,
    pub noise_var: f64,
    pub min_rates: Vec<f64>,
    pub steps_per_episode: usize,
    pub alpha_mode: AlphaMode,
    pub n_paths: usize,
    // Agent.
    pub algorithm: Algorithm,
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    pub tau: f64,
    pub entropy_temp: f64,
    pub hidden_width: usize,
    pub batch_size: usize,
    pub warmup: usize,
    pub twin_critic: bool,
    pub explore_noise: f64,
    // Run.
    pub episodes: usize,
    pub moving_avg_len: usize,
    pub eval_samples: usize,
    pub seeds: Vec<u64>,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_users: 2,
            n_antennas: 16,
            power_budget: 1000.0,
            noise_var: 1.0,
            min_rates: vec![3.0, 3.0],
            steps_per_episode: 1000,
            alpha_mode: AlphaMode::Soft,
            n_paths: 3,
            algorithm: Algorithm::Sac,
            discount: 0.99,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            buffer_capacity: 1_000_000,
            tau: 1e-3,
            entropy_temp: 0.2,
            hidden_width: 256,
            batch_size: 128,
            warmup: 1000,
            twin_critic: false,
            explore_noise: 0.1,
            episodes: 100,
            moving_avg_len: 25,
            eval_samples: 250_000,
            seeds: vec![1, 2, 3],
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    /// Paper-scale learning-curve profile: 2 users, 32 antennas, 30 dB,
    /// minimum rates (3, 3). Episode length and network width are kept at
    /// desktop-runnable values; both only help when raised.
    pub fn paper() -> Self {
        Self {
            n_antennas: 32,
            steps_per_episode: 200,
            hidden_width: 128,
            entropy_temp: 0.02,
            warmup: 500,
            ..Self::default()
        }
    }

    /// CI-scale profile: 8 antennas, 2 users, 50 episodes of 200 steps,
    /// 5000 evaluation samples.
    pub fn desk() -> Self {
        Self {
            n_antennas: 8,
            steps_per_episode: 200,
            episodes: 50,
            eval_samples: 5000,
            hidden_width: 128,
            entropy_temp: 0.02,
            warmup: 500,
            ..Self::default()
        }
    }

    /// Resolve a profile by name.
    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::InvalidConfig {
                field: "profile".into(),
                reason: format!("unknown profile `{other}` (expected paper or desk)"),
            }),
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            n_users: self.n_users,
            n_antennas: self.n_antennas,
            power_budget: self.power_budget,
            noise_var: self.noise_var,
            min_rates: self.min_rates.clone(),
            steps_per_episode: self.steps_per_episode,
            alpha_mode: self.alpha_mode,
            n_paths: self.n_paths,
        }
    }

    pub fn sac_config(&self) -> SacConfig {
        SacConfig {
            hidden_width: self.hidden_width,
            entropy_temp: self.entropy_temp,
            discount: self.discount,
            tau: self.tau,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            batch_size: self.batch_size,
            warmup: self.warmup,
            buffer_capacity: self.buffer_capacity,
            twin_critic: self.twin_critic,
        }
    }

    pub fn ddpg_config(&self) -> DdpgConfig {
        DdpgConfig {
            hidden_width: self.hidden_width,
            discount: self.discount,
            tau: self.tau,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            batch_size: self.batch_size,
            warmup: self.warmup,
            buffer_capacity: self.buffer_capacity,
            explore_noise: self.explore_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        let field = |name: &str, reason: String| Error::InvalidConfig {
            field: name.into(),
            reason,
        };
        if !(self.discount >= 0.0 && self.discount <= 1.0) {
            return Err(field("discount", format!("must lie in [0, 1], got {}", self.discount)));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("tau", self.tau),
            ("entropy_temp", self.entropy_temp),
            ("explore_noise", self.explore_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field(name, format!("must be non-negative and finite, got {v}")));
            }
        }
        if self.tau > 1.0 {
            return Err(field("tau", format!("must lie in (0, 1], got {}", self.tau)));
        }
        for (name, v) in [
            ("hidden_width", self.hidden_width),
            ("batch_size", self.batch_size),
            ("episodes", self.episodes),
            ("moving_avg_len", self.moving_avg_len),
            ("eval_samples", self.eval_samples),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return Err(field(name, "must be positive".into()));
            }
        }
        if self.batch_size > self.buffer_capacity {
            return Err(field(
                "batch_size",
                format!(
                    "must not exceed buffer_capacity ({} > {})",
                    self.batch_size, self.buffer_capacity
                ),
            ));
        }
        if self.seeds.is_empty() {
            return Err(field("seeds", "need at least one seed".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(field("sweep_values", "need at least one value".into()));
            }
            for v in &sweep.values {
                let ok = match sweep.param {
                    SweepParam::SnrDb => v.is_finite(),
                    SweepParam::MinRate => *v > 0.0,
                    SweepParam::NUsers | SweepParam::NAntennas => {
                        *v >= 1.0 && v.fract() == 0.0
                    }
                };
                if !ok {
                    return Err(field(
                        "sweep_values",
                        format!("value {v} invalid for {}", sweep.param.name()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Apply flat `key = value` override lines. Unknown keys are errors.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        let mut uniform_min_rate: Option<f64> = None;
        let mut sweep_param: Option<SweepParam> = self.sweep.as_ref().map(|s| s.param);
        let mut sweep_values: Option<Vec<f64>> = self.sweep.as_ref().map(|s| s.values.clone());
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidConfig {
                field: format!("line {}", lineno + 1),
                reason: format!("expected key = value, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: String| Error::InvalidConfig {
                field: key.to_string(),
                reason,
            };
            let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
            let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
            match key {
                "n_users" => self.n_users = parse_usize(value)?,
                "n_antennas" => self.n_antennas = parse_usize(value)?,
                "power_budget" => self.power_budget = parse_f64(value)?,
                "noise_var" => self.noise_var = parse_f64(value)?,
                "min_rate" => uniform_min_rate = Some(parse_f64(value)?),
                "min_rates" => {
                    self.min_rates = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_>>()?;
                    uniform_min_rate = None;
                }
                "steps_per_episode" => self.steps_per_episode = parse_usize(value)?,
                "alpha_mode" => {
                    self.alpha_mode = match value {
                        "soft" => AlphaMode::Soft,
                        "hard" => AlphaMode::Hard,
                        other => return Err(bad(format!("expected soft or hard, got `{other}`"))),
                    }
                }
                "n_paths" => self.n_paths = parse_usize(value)?,
                "algorithm" => {
                    self.algorithm = match value {
                        "sac" => Algorithm::Sac,
                        "ddpg" => Algorithm::Ddpg,
                        other => return Err(bad(format!("expected sac or ddpg, got `{other}`"))),
                    }
                }
                "discount" => self.discount = parse_f64(value)?,
                "actor_lr" => self.actor_lr = parse_f64(value)?,
                "critic_lr" => self.critic_lr = parse_f64(value)?,
                "buffer_capacity" => self.buffer_capacity = parse_usize(value)?,
                "tau" => self.tau = parse_f64(value)?,
                "entropy_temp" => self.entropy_temp = parse_f64(value)?,
                "hidden_width" => self.hidden_width = parse_usize(value)?,
                "batch_size" => self.batch_size = parse_usize(value)?,
                "warmup" => self.warmup = parse_usize(value)?,
                "twin_critic" => {
                    self.twin_critic = match value {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        other => return Err(bad(format!("expected true or false, got `{other}`"))),
                    }
                }
                "explore_noise" => self.explore_noise = parse_f64(value)?,
                "episodes" => self.episodes = parse_usize(value)?,
                "moving_avg_len" => self.moving_avg_len = parse_usize(value)?,
                "eval_samples" => self.eval_samples = parse_usize(value)?,
                "seeds" => {
                    self.seeds = value
                        .split(',')
                        .map(|v| v.trim().parse::<u64>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_>>()?;
                }
                "sweep_param" => {
                    sweep_param = Some(match value {
                        "snr_db" => SweepParam::SnrDb,
                        "n_users" => SweepParam::NUsers,
                        "min_rate" => SweepParam::MinRate,
                        "n_antennas" => SweepParam::NAntennas,
                        other => {
                            return Err(bad(format!(
                                "expected snr_db, n_users, min_rate or n_antennas, got `{other}`"
                            )))
                        }
                    });
                }
                "sweep_values" => {
                    sweep_values = Some(
                        value
                            .split(',')
                            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
                            .collect::<Result<_>>()?,
                    );
                }
                other => {
                    return Err(Error::InvalidConfig {
                        field: other.to_string(),
                        reason: "unknown config key".into(),
                    })
                }
            }
        }
        if let Some(r) = uniform_min_rate {
            self.min_rates = vec![r; self.n_users];
        } else if self.min_rates.len() != self.n_users && !self.min_rates.is_empty() {
            // A changed user count keeps the first minimum rate for everyone.
            let r = self.min_rates[0];
            self.min_rates = vec![r; self.n_users];
        }
        self.sweep = match (sweep_param, sweep_values) {
            (Some(param), Some(values)) => Some(SweepSpec { param, values }),
            (Some(_), None) => {
                return Err(Error::InvalidConfig {
                    field: "sweep_values".into(),
                    reason: "sweep_param given without sweep_values".into(),
                })
            }
            (None, Some(_)) => {
                return Err(Error::InvalidConfig {
                    field: "sweep_param".into(),
                    reason: "sweep_values given without sweep_param".into(),
                })
            }
            (None, None) => None,
        };
        self.validate()
    }

    /// Render the resolved configuration in the same key=value format
    /// [`ExperimentConfig::apply_overrides`] reads.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("n_users", self.n_users.to_string());
        kv("n_antennas", self.n_antennas.to_string());
        kv("power_budget", self.power_budget.to_string());
        kv("noise_var", self.noise_var.to_string());
        kv(
            "min_rates",
            self.min_rates
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("steps_per_episode", self.steps_per_episode.to_string());
        kv(
            "alpha_mode",
            match self.alpha_mode {
                AlphaMode::Soft => "soft".into(),
                AlphaMode::Hard => "hard".into(),
            },
        );
        kv("n_paths", self.n_paths.to_string());
        kv("algorithm", self.algorithm.name().to_string());
        kv("discount", self.discount.to_string());
        kv("actor_lr", self.actor_lr.to_string());
        kv("critic_lr", self.critic_lr.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("tau", self.tau.to_string());
        kv("entropy_temp", self.entropy_temp.to_string());
        kv("hidden_width", self.hidden_width.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("warmup", self.warmup.to_string());
        kv("twin_critic", self.twin_critic.to_string());
        kv("explore_noise", self.explore_noise.to_string());
        kv("episodes", self.episodes.to_string());
        kv("moving_avg_len", self.moving_avg_len.to_string());
        kv("eval_samples", self.eval_samples.to_string());
        kv(
            "seeds",
            self.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        if let Some(sweep) = &self.sweep {
            kv("sweep_param", sweep.param.name().to_string());
            kv(
                "sweep_values",
                sweep
                    .values
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        s
    }

    /// Derive the per-point config of one sweep value.
    pub fn at_sweep_value(&self, param: SweepParam, value: f64) -> Self {
        let mut cfg = self.clone();
        cfg.sweep = None;
        match param {
            SweepParam::SnrDb => {
                cfg.power_budget = cfg.noise_var * 10f64.powf(value / 10.0);
            }
            SweepParam::NUsers => {
                cfg.n_users = value as usize;
                let r = cfg.min_rates.first().copied().unwrap_or(3.0);
                cfg.min_rates = vec![r; cfg.n_users];
            }
            SweepParam::MinRate => {
                cfg.min_rates = vec![value; cfg.n_users];
            }
            SweepParam::NAntennas => {
                cfg.n_antennas = value as usize;
            }
        }
        cfg
    }
}

fn agent_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

fn eval_stream_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(0xB5)
}

/// Build the configured agent for one seed.
pub fn build_agent(cfg: &ExperimentConfig, seed: u64) -> Box<dyn Agent + Send> {
    let env_cfg = cfg.env_config();
    match cfg.algorithm {
        Algorithm::Sac => Box::new(SacAgent::new(
            env_cfg.obs_dim(),
            env_cfg.action_dim(),
            cfg.sac_config(),
            agent_seed(seed),
        )),
        Algorithm::Ddpg => Box::new(DdpgAgent::new(
            env_cfg.obs_dim(),
            env_cfg.action_dim(),
            cfg.ddpg_config(),
            agent_seed(seed),
        )),
    }
}

fn save_agent(agent: &(dyn Agent + Send), path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    agent.save_checkpoint(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Load either agent kind from a checkpoint file.
pub fn load_agent(path: &Path) -> Result<Box<dyn Agent + Send>> {
    if !path.exists() {
        return Err(Error::MissingCheckpoint(path.display().to_string()));
    }
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    let kind = text
        .lines()
        .nth(1)
        .ok_or_else(|| Error::Checkpoint("missing agent line".into()))?;
    match kind {
        "agent sac" => Ok(Box::new(SacAgent::load(
            BufReader::new(text.as_bytes()),
            0,
        )?)),
        "agent ddpg" => Ok(Box::new(DdpgAgent::load(
            BufReader::new(text.as_bytes()),
            0,
        )?)),
        other => Err(Error::Checkpoint(format!("unknown agent kind `{other}`"))),
    }
}

/// Result of one seeded training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub seed: u64,
    pub curve: LearningCurve,
    pub curve_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub final_moving_avg: f64,
    pub wall_clock_secs: f64,
}

/// Train one agent per seed (in parallel), writing per-seed curve files and
/// checkpoints under `out_dir`.
pub fn run_training(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("resolved_config.txt"), cfg.to_config_text())?;
    let mut outcomes: Vec<TrainOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<TrainOutcome> {
            let started = Instant::now();
            let mut env = NomaEnv::new(cfg.env_config(), seed)?;
            let mut agent = build_agent(cfg, seed);
            let curve = train(agent.as_mut(), &mut env, cfg.episodes, cfg.moving_avg_len)?;
            let curve_path = out_dir.join(format!("curve_seed{seed}.csv"));
            let mut file = BufWriter::new(fs::File::create(&curve_path)?);
            curve.write_csv(&mut file)?;
            file.flush()?;
            let checkpoint_path = out_dir.join(format!("checkpoint_seed{seed}.txt"));
            save_agent(agent.as_ref(), &checkpoint_path)?;
            Ok(TrainOutcome {
                seed,
                final_moving_avg: curve.final_moving_avg().unwrap_or(0.0),
                curve,
                curve_path,
                checkpoint_path,
                wall_clock_secs: started.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;
    outcomes.sort_by_key(|o| {
        cfg.seeds
            .iter()
            .position(|s| *s == o.seed)
            .unwrap_or(usize::MAX)
    });
    Ok(outcomes)
}

/// Evaluation statistics over i.i.d. channel draws with a deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_sum_rate: f64,
    pub stderr_sum_rate: f64,
    pub mean_reward: f64,
    pub stderr_reward: f64,
    /// Fraction of samples with any α factor below 1.
    pub violation_rate: f64,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "mean_sum_rate,std_err_sum_rate,mean_reward,std_err_reward,violation_rate,n_samples"
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            self.mean_sum_rate,
            self.stderr_sum_rate,
            self.mean_reward,
            self.stderr_reward,
            self.violation_rate,
            self.n_samples
        )?;
        Ok(())
    }
}

struct RunningStats {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl RunningStats {
    fn new() -> Self {
        Self {
            n: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

/// Evaluate a trained agent's deterministic policy on `cfg.eval_samples`
/// fresh channels. Identical seeds give identical statistics.
pub fn evaluate_agent(
    agent: &mut (dyn Agent + Send),
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<EvalReport> {
    let env_cfg = cfg.env_config();
    env_cfg.validate()?;
    if agent.obs_dim() != env_cfg.obs_dim() || agent.action_dim() != env_cfg.action_dim() {
        return Err(Error::CheckpointMismatch(format!(
            "agent dims ({}, {}) vs config dims ({}, {})",
            agent.obs_dim(),
            agent.action_dim(),
            env_cfg.obs_dim(),
            env_cfg.action_dim()
        )));
    }
    let model = ChannelModel {
        n_paths: env_cfg.n_paths,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(eval_stream_seed(seed));
    let mut sum_rate = RunningStats::new();
    let mut reward = RunningStats::new();
    let mut violations = 0usize;
    for _ in 0..cfg.eval_samples {
        let ch = model.draw_with(env_cfg.n_users, env_cfg.n_antennas, &mut rng)?;
        let obs = encode_state(&ch, 1.0);
        let action = agent.act(&obs, true);
        let (bf, pa) = decode_action(&action, &env_cfg)?;
        let report = rate_report(&ch, &bf, &pa, env_cfg.noise_var)?;
        let breakdown = compute_reward(&report, &pa, &env_cfg)?;
        sum_rate.push(report.sum_rate);
        reward.push(breakdown.reward);
        if breakdown.alpha_factors.iter().any(|a| *a < 1.0) {
            violations += 1;
        }
    }
    Ok(EvalReport {
        mean_sum_rate: sum_rate.mean(),
        stderr_sum_rate: sum_rate.stderr(),
        mean_reward: reward.mean(),
        stderr_reward: reward.stderr(),
        violation_rate: violations as f64 / cfg.eval_samples as f64,
        n_samples: cfg.eval_samples,
    })
}

/// Load a checkpoint and evaluate it against `cfg`.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<EvalReport> {
    let mut agent = load_agent(checkpoint)?;
    evaluate_agent(agent.as_mut(), cfg, seed)
}

/// One sweep table row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: f64,
    pub method: String,
    pub mean_sum_rate: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

pub const SWEEP_METHODS: [&str; 3] = ["drl", "tdma", "strongest_path_noma"];

pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "sweep_param,value,method,mean_sum_rate,std_err,n_samples")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.sweep_param, r.value, r.method, r.mean_sum_rate, r.std_err, r.n_samples
        )?;
    }
    Ok(())
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::MalformedCsv {
        line: 1,
        reason: "empty file".into(),
    })?;
    if header != "sweep_param,value,method,mean_sum_rate,std_err,n_samples" {
        return Err(Error::MalformedCsv {
            line: 1,
            reason: format!("unexpected header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::MalformedCsv {
                line: i + 1,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let err = |e: String| Error::MalformedCsv {
            line: i + 1,
            reason: e,
        };
        rows.push(SweepRow {
            sweep_param: fields[0].to_string(),
            value: fields[1].parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
            method: fields[2].to_string(),
            mean_sum_rate: fields[3]
                .parse()
                .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
            std_err: fields[4]
                .parse()
                .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?,
            n_samples: fields[5]
                .parse()
                .map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
        });
    }
    Ok(rows)
}

/// Mean sum-rate of the two analytic baselines over a seeded channel stream.
fn baseline_stats(
    env_cfg: &EnvConfig,
    eval_samples: usize,
    seed: u64,
) -> Result<(RunningStats, RunningStats)> {
    let model = ChannelModel {
        n_paths: env_cfg.n_paths,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(eval_stream_seed(seed));
    let mut tdma = RunningStats::new();
    let mut spn = RunningStats::new();
    for _ in 0..eval_samples {
        let ch = model.draw_with(env_cfg.n_users, env_cfg.n_antennas, &mut rng)?;
        tdma.push(tdma_sum_rate(&ch, env_cfg.power_budget, env_cfg.noise_var));
        let report = strongest_path_noma(
            &ch,
            env_cfg.power_budget,
            env_cfg.noise_var,
            &env_cfg.min_rates,
        )?;
        spn.push(report.sum_rate);
    }
    Ok((tdma, spn))
}

/// Train (per sweep value and seed), evaluate the learned policy and both
/// baselines on the same channel stream, and return the comparison rows in
/// deterministic order (value-major, then method, then seed).
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::InvalidConfig {
        field: "sweep_param".into(),
        reason: "sweep requested without a sweep descriptor".into(),
    })?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("resolved_config.txt"), cfg.to_config_text())?;

    struct PointResult {
        value_idx: usize,
        seed_idx: usize,
        drl: EvalReport,
        tdma_mean: f64,
        tdma_stderr: f64,
        spn_mean: f64,
        spn_stderr: f64,
    }

    let tasks: Vec<(usize, usize)> = (0..sweep.values.len())
        .flat_map(|v| (0..cfg.seeds.len()).map(move |s| (v, s)))
        .collect();

    let results: Vec<PointResult> = tasks
        .par_iter()
        .map(|&(value_idx, seed_idx)| -> Result<PointResult> {
            let value = sweep.values[value_idx];
            let seed = cfg.seeds[seed_idx];
            let point_cfg = cfg.at_sweep_value(sweep.param, value);
            point_cfg.validate()?;
            // Decorrelate the evaluation stream across sweep points.
            let point_eval_seed = seed
                .wrapping_add((value_idx as u64).wrapping_mul(0x9E37_79B9))
                .wrapping_add(1);

            let mut env = NomaEnv::new(point_cfg.env_config(), seed)?;
            let mut agent = build_agent(&point_cfg, seed);
            train(
                agent.as_mut(),
                &mut env,
                point_cfg.episodes,
                point_cfg.moving_avg_len,
            )?;
            let drl = evaluate_agent(agent.as_mut(), &point_cfg, point_eval_seed)?;
            let (tdma, spn) =
                baseline_stats(&point_cfg.env_config(), point_cfg.eval_samples, point_eval_seed)?;
            Ok(PointResult {
                value_idx,
                seed_idx,
                drl,
                tdma_mean: tdma.mean(),
                tdma_stderr: tdma.stderr(),
                spn_mean: spn.mean(),
                spn_stderr: spn.stderr(),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(sweep.values.len() * SWEEP_METHODS.len() * cfg.seeds.len());
    for value_idx in 0..sweep.values.len() {
        let value = sweep.values[value_idx];
        for method in SWEEP_METHODS {
            for seed_idx in 0..cfg.seeds.len() {
                let r = results
                    .iter()
                    .find(|r| r.value_idx == value_idx && r.seed_idx == seed_idx)
                    .expect("every task produced a result");
                let (mean, stderr) = match method {
                    "drl" => (r.drl.mean_sum_rate, r.drl.stderr_sum_rate),
                    "tdma" => (r.tdma_mean, r.tdma_stderr),
                    _ => (r.spn_mean, r.spn_stderr),
                };
                rows.push(SweepRow {
                    sweep_param: sweep.param.name().to_string(),
                    value,
                    method: method.to_string(),
                    mean_sum_rate: mean,
                    std_err: stderr,
                    n_samples: cfg.eval_samples,
                });
            }
        }
    }
    let mut file = BufWriter::new(fs::File::create(out_dir.join("sweep.csv"))?);
    write_sweep_csv(&mut file, &rows)?;
    file.flush()?;
    Ok(rows)
}

/// Baseline-only comparison on one configuration (no training), written as
/// `method,mean_sum_rate,std_err,n_samples` rows.
pub fn run_baseline(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let (tdma, spn) = baseline_stats(&cfg.env_config(), cfg.eval_samples, seed)?;
    let rows = vec![
        SweepRow {
            sweep_param: "none".into(),
            value: 0.0,
            method: "tdma".into(),
            mean_sum_rate: tdma.mean(),
            std_err: tdma.stderr(),
            n_samples: cfg.eval_samples,
        },
        SweepRow {
            sweep_param: "none".into(),
            value: 0.0,
            method: "strongest_path_noma".into(),
            mean_sum_rate: spn.mean(),
            std_err: spn.stderr(),
            n_samples: cfg.eval_samples,
        },
    ];
    let mut file = BufWriter::new(fs::File::create(out_dir.join("baseline.csv"))?);
    write_sweep_csv(&mut file, &rows)?;
    file.flush()?;
    Ok(rows)
}
