//! The downlink MDP: channel observations, beamformer/power actions, and the
//! constraint-weighted reward `r = α · Σ R_k`.
//!
//! Each step evaluates the decoded action against the current channel draw,
//! then draws a fresh independent channel for the next observation. The α
//! factor multiplies in one ratio per minimum-rate constraint plus one for
//! the power budget; in hard mode it collapses to a 0/1 indicator.

use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::channel::{ChannelModel, ChannelRealization};
use crate::error::{Error, Result};
use crate::phy::{project_beamformer, rate_report, HybridBeamformer, PowerAllocation, RateReport};

/// Flat real observation: `Re(h_1), Im(h_1), …, Re(h_K), Im(h_K), α_prev`.
pub type Observation = Array1<f64>;

/// Flat real action in `[-1, 1]`: per user the digital column (Re then Im),
/// the analog column (Re then Im), then the K raw power scalars.
pub type ActionVector = Array1<f64>;

/// How constraint violations scale the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    /// Per-constraint ratios `R_k/r_k` and `P/Σp` multiply the sum-rate.
    Soft,
    /// All-or-nothing: α is 1 when every constraint holds, else 0.
    Hard,
}

/// System dimensions and reward parameters for one environment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub n_users: usize,
    pub n_antennas: usize,
    pub power_budget: f64,
    pub noise_var: f64,
    pub min_rates: Vec<f64>,
    pub steps_per_episode: usize,
    pub alpha_mode: AlphaMode,
    pub n_paths: usize,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, reason: String| Error::InvalidConfig {
            field: name.into(),
            reason,
        };
        if self.n_users == 0 {
            return Err(field("n_users", "must be at least 1".into()));
        }
        if self.n_antennas < self.n_users {
            return Err(Error::MoreUsersThanAntennas {
                n_users: self.n_users,
                n_antennas: self.n_antennas,
            });
        }
        if !(self.power_budget > 0.0) {
            return Err(field("power_budget", format!("must be positive, got {}", self.power_budget)));
        }
        if !(self.noise_var > 0.0) {
            return Err(field("noise_var", format!("must be positive, got {}", self.noise_var)));
        }
        if self.min_rates.len() != self.n_users {
            return Err(field(
                "min_rates",
                format!("expected {} entries, got {}", self.n_users, self.min_rates.len()),
            ));
        }
        if let Some(r) = self.min_rates.iter().find(|r| !(**r > 0.0)) {
            return Err(field("min_rates", format!("entries must be positive, got {r}")));
        }
        if self.steps_per_episode == 0 {
            return Err(field("steps_per_episode", "must be at least 1".into()));
        }
        if self.n_paths == 0 {
            return Err(field("n_paths", "must be at least 1".into()));
        }
        Ok(())
    }

    /// Observation length `2NK + 1`.
    pub fn obs_dim(&self) -> usize {
        2 * self.n_antennas * self.n_users + 1
    }

    /// Action length `2K² + 2NK + K`.
    pub fn action_dim(&self) -> usize {
        let k = self.n_users;
        let n = self.n_antennas;
        2 * k * k + 2 * n * k + k
    }
}

/// The α factors behind one reward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    /// K rate factors followed by the power factor, each in `[0, 1]`.
    pub alpha_factors: Vec<f64>,
    /// Product of the factors.
    pub alpha: f64,
    /// Unweighted sum-rate in bits/s/Hz.
    pub raw_sum_rate: f64,
    /// `alpha * raw_sum_rate`.
    pub reward: f64,
}

/// Rate-constraint factor of the soft α: `R_k/r_k` below the requirement, 1 above.
pub fn alpha_rate_factor(achieved: f64, required: f64) -> Result<f64> {
    if !(required > 0.0) {
        return Err(Error::NonPositiveMinRate(required));
    }
    Ok(if achieved < required {
        achieved / required
    } else {
        1.0
    })
}

/// Power-budget factor of the soft α: `P/Σp` over budget, 1 within it.
pub fn alpha_power_factor(total_used: f64, budget: f64) -> f64 {
    if total_used > budget {
        budget / total_used
    } else {
        1.0
    }
}

/// Reward `α · Σ R_k` with the per-constraint α factors spelled out.
pub fn compute_reward(
    report: &RateReport,
    pa: &PowerAllocation,
    cfg: &EnvConfig,
) -> Result<RewardBreakdown> {
    let mut factors = Vec::with_capacity(cfg.n_users + 1);
    match cfg.alpha_mode {
        AlphaMode::Soft => {
            for (rate, min_rate) in report.rates.iter().zip(&cfg.min_rates) {
                factors.push(alpha_rate_factor(*rate, *min_rate)?);
            }
            factors.push(alpha_power_factor(pa.total(), pa.budget()));
        }
        AlphaMode::Hard => {
            for (rate, min_rate) in report.rates.iter().zip(&cfg.min_rates) {
                factors.push(if rate >= min_rate { 1.0 } else { 0.0 });
            }
            factors.push(if pa.total() <= pa.budget() { 1.0 } else { 0.0 });
        }
    }
    let alpha = factors.iter().product::<f64>();
    Ok(RewardBreakdown {
        alpha_factors: factors,
        alpha,
        raw_sum_rate: report.sum_rate,
        reward: alpha * report.sum_rate,
    })
}

/// Flatten channel + previous α into the fixed observation layout.
pub fn encode_state(channels: &ChannelRealization, prev_alpha: f64) -> Observation {
    let n = channels.n_antennas();
    let k = channels.n_users();
    let mut out = Vec::with_capacity(2 * n * k + 1);
    for user in 0..k {
        let h = channels.channel(user);
        out.extend(h.iter().map(|z| z.re));
        out.extend(h.iter().map(|z| z.im));
    }
    out.push(prev_alpha);
    Array1::from(out)
}

/// Recover the per-user channel vectors from an observation (audit helper).
pub fn decode_state_channels(
    obs: &Observation,
    n_antennas: usize,
    n_users: usize,
) -> Result<Vec<Array1<Complex64>>> {
    let expected = 2 * n_antennas * n_users + 1;
    if obs.len() != expected {
        return Err(Error::ShapeMismatch {
            context: "decode_state_channels",
            expected,
            actual: obs.len(),
        });
    }
    let mut channels = Vec::with_capacity(n_users);
    for user in 0..n_users {
        let base = 2 * n_antennas * user;
        let h = Array1::from_iter(
            (0..n_antennas).map(|i| Complex64::new(obs[base + i], obs[base + n_antennas + i])),
        );
        channels.push(h);
    }
    Ok(channels)
}

/// Interpret a raw action: beamformer matrices through the feasibility
/// projection, raw power scalars through `p_k = P (x_k + 1) / 2`.
pub fn decode_action(
    action: &ActionVector,
    cfg: &EnvConfig,
) -> Result<(HybridBeamformer, PowerAllocation)> {
    let expected = cfg.action_dim();
    if action.len() != expected {
        return Err(Error::ShapeMismatch {
            context: "decode_action",
            expected,
            actual: action.len(),
        });
    }
    let k = cfg.n_users;
    let n = cfg.n_antennas;
    let mut raw_digital = Array2::<Complex64>::zeros((k, k));
    let mut raw_analog = Array2::<Complex64>::zeros((n, k));
    let per_user = 2 * k + 2 * n;
    for user in 0..k {
        let base = per_user * user;
        for i in 0..k {
            raw_digital[(i, user)] = Complex64::new(action[base + i], action[base + k + i]);
        }
        let abase = base + 2 * k;
        for i in 0..n {
            raw_analog[(i, user)] = Complex64::new(action[abase + i], action[abase + n + i]);
        }
    }
    let bf = project_beamformer(&raw_analog, &raw_digital);
    let pbase = per_user * k;
    let powers: Vec<f64> = (0..k)
        .map(|i| cfg.power_budget * (action[pbase + i] + 1.0) / 2.0)
        .collect();
    let pa = PowerAllocation::new(powers, cfg.power_budget)?;
    Ok((bf, pa))
}

/// What one environment step returns.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Observation of the freshly drawn next channel.
    pub observation: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
}

#[derive(Debug, Clone)]
struct TraceRecord {
    episode: usize,
    step: usize,
    reward: f64,
    alpha: f64,
    sum_rate: f64,
    rates: Vec<f64>,
}

/// Single-owner episodic environment over i.i.d. channel draws.
#[derive(Debug)]
pub struct NomaEnv {
    cfg: EnvConfig,
    model: ChannelModel,
    rng: ChaCha12Rng,
    current: Option<ChannelRealization>,
    prev_alpha: f64,
    step_in_episode: usize,
    episode_index: usize,
    trace: Option<Vec<TraceRecord>>,
}

impl NomaEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let model = ChannelModel { n_paths: cfg.n_paths };
        Ok(Self {
            cfg,
            model,
            rng: ChaCha12Rng::seed_from_u64(seed),
            current: None,
            prev_alpha: 1.0,
            step_in_episode: 0,
            episode_index: 0,
            trace: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Keep per-step records for [`NomaEnv::write_trace`].
    pub fn enable_tracing(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(Vec::new());
        }
    }

    fn draw(&mut self) -> ChannelRealization {
        self.model
            .draw_with(self.cfg.n_users, self.cfg.n_antennas, &mut self.rng)
            .expect("config validated at construction")
    }

    /// Start a new episode: fresh channel, α reset to 1.
    pub fn reset(&mut self) -> Observation {
        if self.current.is_some() {
            self.episode_index += 1;
        }
        let ch = self.draw();
        self.prev_alpha = 1.0;
        self.step_in_episode = 0;
        let obs = encode_state(&ch, self.prev_alpha);
        self.current = Some(ch);
        obs
    }

    /// Peek at the channel the next step will be scored against.
    pub fn current_channel(&self) -> Option<&ChannelRealization> {
        self.current.as_ref()
    }

    pub fn step(&mut self, action: &ActionVector) -> Result<StepOutcome> {
        let ch = self.current.as_ref().ok_or(Error::StepBeforeReset)?;
        if self.step_in_episode >= self.cfg.steps_per_episode {
            return Err(Error::StepBeforeReset);
        }
        let (bf, pa) = decode_action(action, &self.cfg)?;
        let report = rate_report(ch, &bf, &pa, self.cfg.noise_var)?;
        let breakdown = compute_reward(&report, &pa, &self.cfg)?;

        if let Some(trace) = &mut self.trace {
            trace.push(TraceRecord {
                episode: self.episode_index,
                step: self.step_in_episode,
                reward: breakdown.reward,
                alpha: breakdown.alpha,
                sum_rate: breakdown.raw_sum_rate,
                rates: report.rates.clone(),
            });
        }

        self.step_in_episode += 1;
        let done = self.step_in_episode >= self.cfg.steps_per_episode;
        self.prev_alpha = breakdown.alpha;
        let next = self.draw();
        let observation = encode_state(&next, self.prev_alpha);
        self.current = Some(next);
        Ok(StepOutcome {
            observation,
            reward: breakdown.reward,
            breakdown,
            done,
        })
    }

    /// Write accumulated trace records as comma-separated text.
    pub fn write_trace<W: Write>(&self, w: &mut W) -> Result<()> {
        let records = self.trace.as_deref().unwrap_or(&[]);
        write!(w, "episode,step,reward,alpha,sum_rate")?;
        for k in 0..self.cfg.n_users {
            write!(w, ",rate_{k}")?;
        }
        writeln!(w)?;
        for r in records {
            write!(
                w,
                "{},{},{},{},{}",
                r.episode, r.step, r.reward, r.alpha, r.sum_rate
            )?;
            for rate in &r.rates {
                write!(w, ",{rate}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathComponent;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn small_cfg() -> EnvConfig {
        EnvConfig {
            n_users: 2,
            n_antennas: 4,
            power_budget: 2.0,
            noise_var: 1.0,
            min_rates: vec![3.0, 3.0],
            steps_per_episode: 3,
            alpha_mode: AlphaMode::Soft,
            n_paths: 3,
        }
    }

    #[test]
    fn dimensions_match_closed_forms() {
        let cfg = EnvConfig {
            n_users: 2,
            n_antennas: 32,
            power_budget: 1.0,
            noise_var: 1.0,
            min_rates: vec![3.0, 3.0],
            steps_per_episode: 10,
            alpha_mode: AlphaMode::Soft,
            n_paths: 3,
        };
        assert_eq!(cfg.obs_dim(), 129);
        assert_eq!(cfg.action_dim(), 2 * 4 + 2 * 64 + 2);
    }

    #[test]
    fn encode_state_unrolls_re_im_alpha() {
        // Single user, N = 2, h = [1+2j, 0].
        // a(2, pi/2) = [1, 1], a(2, 0) = [1, -1]:
        // (0.5+1j)*a(pi/2) + (0.5+1j)*a(0) = [1+2j, 0].
        let paths = vec![vec![
            PathComponent::new(Complex64::new(0.5, 1.0), std::f64::consts::FRAC_PI_2).unwrap(),
            PathComponent::new(Complex64::new(0.5, 1.0), 0.0).unwrap(),
        ]];
        let ch = ChannelRealization::from_paths(paths, 2).unwrap();
        let obs = encode_state(&ch, 1.0);
        let expect = [1.0, 0.0, 2.0, 0.0, 1.0];
        for (a, b) in obs.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn encode_decode_round_trips_channels() {
        let ch = crate::channel::draw_channel_set(3, 5, 3, 8).unwrap();
        let obs = encode_state(&ch, 0.25);
        let decoded = decode_state_channels(&obs, 5, 3).unwrap();
        for k in 0..3 {
            assert_eq!(&decoded[k], ch.channel(k));
        }
        assert_eq!(obs[obs.len() - 1], 0.25);
    }

    #[test]
    fn alpha_rate_factor_cases() {
        assert_abs_diff_eq!(alpha_rate_factor(2.0, 3.0).unwrap(), 2.0 / 3.0);
        assert_eq!(alpha_rate_factor(3.0, 3.0).unwrap(), 1.0);
        assert_eq!(alpha_rate_factor(0.0, 3.0).unwrap(), 0.0);
        assert!(alpha_rate_factor(1.0, 0.0).is_err());
        assert!(alpha_rate_factor(1.0, -1.0).is_err());
    }

    #[test]
    fn alpha_power_factor_cases() {
        assert_abs_diff_eq!(alpha_power_factor(2.0, 1.0), 0.5);
        assert_eq!(alpha_power_factor(0.8, 1.0), 1.0);
        assert_eq!(alpha_power_factor(1.0, 1.0), 1.0);
    }

    fn report_with_rates(rates: &[f64]) -> RateReport {
        RateReport {
            sinr: rates.iter().map(|r| 2f64.powf(*r) - 1.0).collect(),
            rates: rates.to_vec(),
            sum_rate: rates.iter().sum(),
        }
    }

    #[test]
    fn reward_feasible_point_keeps_sum_rate() {
        let cfg = small_cfg();
        let report = RateReport {
            sum_rate: 5.0,
            ..report_with_rates(&[3.0, 3.5])
        };
        let pa = PowerAllocation::new(vec![0.5, 0.5], 2.0).unwrap();
        let out = compute_reward(&report, &pa, &cfg).unwrap();
        assert!(out.alpha_factors.iter().all(|a| *a == 1.0));
        assert_abs_diff_eq!(out.reward, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn reward_soft_violation_hand_example() {
        // R = (1.5, 4), r = (3, 3), within power budget:
        // alpha = (1.5/3)*1*1 = 0.5, reward = 0.5 * 5.5 = 2.75.
        let cfg = small_cfg();
        let report = report_with_rates(&[1.5, 4.0]);
        let pa = PowerAllocation::new(vec![1.0, 1.0], 2.0).unwrap();
        let out = compute_reward(&report, &pa, &cfg).unwrap();
        assert_abs_diff_eq!(out.alpha, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.reward, 2.75, epsilon = 1e-12);
    }

    #[test]
    fn reward_hard_violation_is_zero() {
        let mut cfg = small_cfg();
        cfg.alpha_mode = AlphaMode::Hard;
        let report = report_with_rates(&[1.5, 4.0]);
        let pa = PowerAllocation::new(vec![1.0, 1.0], 2.0).unwrap();
        let out = compute_reward(&report, &pa, &cfg).unwrap();
        assert_eq!(out.alpha, 0.0);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn decode_action_power_mapping_bounds() {
        let cfg = small_cfg();
        let dim = cfg.action_dim();
        let mut low = Array1::from_elem(dim, 0.0);
        let pbase = dim - cfg.n_users;
        low[pbase] = -1.0;
        low[pbase + 1] = -1.0;
        let (_, pa) = decode_action(&low, &cfg).unwrap();
        assert_eq!(pa.powers(), &[0.0, 0.0]);

        let mut high = Array1::from_elem(dim, 0.0);
        high[pbase] = 1.0;
        high[pbase + 1] = 1.0;
        let (_, pa) = decode_action(&high, &cfg).unwrap();
        assert_eq!(pa.powers(), &[2.0, 2.0]);
        assert!(pa.total() > pa.budget());
    }

    #[test]
    fn decode_action_wrong_length_errors() {
        let cfg = small_cfg();
        let bad = Array1::zeros(cfg.action_dim() + 1);
        assert!(matches!(
            decode_action(&bad, &cfg),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn decode_action_beamformer_satisfies_invariants() {
        let cfg = small_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..20 {
            let action = Array1::from_shape_fn(cfg.action_dim(), |_| {
                rand::Rng::random_range(&mut rng, -1.0..1.0)
            });
            let (bf, _) = decode_action(&action, &cfg).unwrap();
            let target = 1.0 / (cfg.n_antennas as f64).sqrt();
            for z in bf.analog().iter() {
                assert_abs_diff_eq!(z.norm(), target, epsilon = 1e-9);
            }
            for col in 0..cfg.n_users {
                let norm = bf
                    .composed()
                    .column(col)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn step_before_reset_errors() {
        let cfg = small_cfg();
        let mut env = NomaEnv::new(cfg.clone(), 1).unwrap();
        let action = Array1::zeros(cfg.action_dim());
        assert!(matches!(env.step(&action), Err(Error::StepBeforeReset)));
    }

    #[test]
    fn done_flags_follow_episode_length() {
        let cfg = small_cfg();
        let mut env = NomaEnv::new(cfg.clone(), 1).unwrap();
        env.reset();
        let action = Array1::zeros(cfg.action_dim());
        let flags: Vec<bool> = (0..3).map(|_| env.step(&action).unwrap().done).collect();
        assert_eq!(flags, vec![false, false, true]);
        // Stepping past the end without reset is an error.
        assert!(env.step(&action).is_err());
        env.reset();
        assert!(!env.step(&action).unwrap().done);
    }

    #[test]
    fn step_reward_matches_manual_recompute() {
        let cfg = small_cfg();
        let mut env = NomaEnv::new(cfg.clone(), 7).unwrap();
        env.reset();
        let ch = env.current_channel().unwrap().clone();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let action = Array1::from_shape_fn(cfg.action_dim(), |_| {
            rand::Rng::random_range(&mut rng, -1.0..1.0)
        });
        let out = env.step(&action).unwrap();
        let (bf, pa) = decode_action(&action, &cfg).unwrap();
        let report = rate_report(&ch, &bf, &pa, cfg.noise_var).unwrap();
        let expect = compute_reward(&report, &pa, &cfg).unwrap();
        assert_eq!(out.reward, expect.reward);
        assert_eq!(out.breakdown.alpha_factors, expect.alpha_factors);
        // Next observation carries the α just computed.
        assert_eq!(out.observation[out.observation.len() - 1], expect.alpha);
    }

    #[test]
    fn episode_trajectory_is_reproducible() {
        let cfg = small_cfg();
        let run = |seed: u64| {
            let mut env = NomaEnv::new(cfg.clone(), seed).unwrap();
            let mut obs = env.reset();
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5a5a);
            let mut log = Vec::new();
            for _ in 0..cfg.steps_per_episode {
                let action = Array1::from_shape_fn(cfg.action_dim(), |_| {
                    rand::Rng::random_range(&mut rng, -1.0..1.0)
                });
                let out = env.step(&action).unwrap();
                log.push((obs.clone(), out.reward, out.done));
                obs = out.observation;
            }
            log
        };
        let a = run(11);
        let b = run(11);
        for ((oa, ra, da), (ob, rb, db)) in a.iter().zip(&b) {
            assert_eq!(oa, ob);
            assert_eq!(ra, rb);
            assert_eq!(da, db);
        }
    }

    #[test]
    fn trace_records_have_expected_columns() {
        let cfg = small_cfg();
        let mut env = NomaEnv::new(cfg.clone(), 3).unwrap();
        env.enable_tracing();
        env.reset();
        let action = Array1::zeros(cfg.action_dim());
        for _ in 0..2 {
            env.step(&action).unwrap();
        }
        let mut buf = Vec::new();
        env.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,step,reward,alpha,sum_rate,rate_0,rate_1"
        );
        assert_eq!(lines.count(), 2);
    }

    proptest! {
        #[test]
        fn soft_reward_dominates_hard_reward(
            r1 in 0.0..6.0f64, r2 in 0.0..6.0f64,
            p1 in 0.0..2.0f64, p2 in 0.0..2.0f64,
        ) {
            let soft_cfg = small_cfg();
            let mut hard_cfg = small_cfg();
            hard_cfg.alpha_mode = AlphaMode::Hard;
            let report = report_with_rates(&[r1, r2]);
            let pa = PowerAllocation::new(vec![p1, p2], 2.0).unwrap();
            let soft = compute_reward(&report, &pa, &soft_cfg).unwrap();
            let hard = compute_reward(&report, &pa, &hard_cfg).unwrap();
            prop_assert!(soft.reward >= hard.reward - 1e-15);
            // alpha is the product of its factors, and reward never exceeds raw sum-rate.
            let prod: f64 = soft.alpha_factors.iter().product();
            prop_assert!((soft.alpha - prod).abs() < 1e-12);
            prop_assert!(soft.reward <= soft.raw_sum_rate + 1e-15);
            let feasible = r1 >= 3.0 && r2 >= 3.0 && p1 + p2 <= 2.0;
            prop_assert_eq!(hard.alpha == 1.0, feasible);
        }

        #[test]
        fn alpha_factors_continuous_at_boundary(rate in 0.5..10.0f64) {
            // Approaching the requirement from below tends to 1.
            let just_below = alpha_rate_factor(rate * (1.0 - 1e-12), rate).unwrap();
            prop_assert!((just_below - 1.0).abs() < 1e-9);
            prop_assert_eq!(alpha_rate_factor(rate, rate).unwrap(), 1.0);
        }
    }
}
