//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible with `--nocapture`; test names map 1:1 to
//! criteria).
//!
//! The learning-based criteria (4-7) train real agents and dominate the
//! runtime; trained artifacts are shared across tests through `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use mmw_noma_drl::agents::{train, DdpgAgent, LearningCurve, SacAgent, Transition};
use mmw_noma_drl::baselines::tdma_sum_rate;
use mmw_noma_drl::channel::draw_channel_set;
use mmw_noma_drl::env::{
    alpha_power_factor, alpha_rate_factor, compute_reward, AlphaMode, EnvConfig, NomaEnv,
};
use mmw_noma_drl::harness::{
    evaluate_checkpoint, run_baseline, run_sweep, run_training, ExperimentConfig, SweepParam,
    SweepSpec,
};
use mmw_noma_drl::nn::{Mlp, MlpSpec, OutputActivation};
use mmw_noma_drl::phy::{project_beamformer, rate_report, PowerAllocation, RateReport};

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

// ── Criterion 1: oracle equivalence for the SINR/rate arithmetic ───────────

/// Plain-index-loop re-evaluation of the SINR and rate definitions, kept
/// textually independent of the library implementation.
fn naive_rates(
    channels: &[Vec<(f64, f64)>],
    beams: &[Vec<(f64, f64)>],
    powers: &[f64],
    noise_var: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let k_users = channels.len();
    let mut sinrs = vec![0.0; k_users];
    let mut rates = vec![0.0; k_users];
    for k in 0..k_users {
        let dot = |w: &Vec<(f64, f64)>| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (h, wv) in channels[k].iter().zip(w.iter()) {
                // conj(h) * w
                re += h.0 * wv.0 + h.1 * wv.1;
                im += h.0 * wv.1 - h.1 * wv.0;
            }
            re * re + im * im
        };
        let mut denom = noise_var;
        for j in k + 1..k_users {
            denom += dot(&beams[j]) * powers[j];
        }
        sinrs[k] = dot(&beams[k]) * powers[k] / denom;
        rates[k] = (1.0 + sinrs[k]).log2();
    }
    let sum = rates.iter().sum();
    (sinrs, rates, sum)
}

#[test]
fn criterion_1_phy_matches_independent_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xACCE);
    for trial in 0..1000u64 {
        let k = rng.random_range(1..5usize);
        let n = rng.random_range(k..10usize);
        let ch = draw_channel_set(k, n, 3, trial).unwrap();
        let raw_analog =
            Array2::from_shape_fn((n, k), |_| Complex64::new(rng.random(), rng.random()));
        let raw_digital =
            Array2::from_shape_fn((k, k), |_| Complex64::new(rng.random(), rng.random()));
        let bf = project_beamformer(&raw_analog, &raw_digital);
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
        let noise = rng.random_range(0.05..2.0);
        let pa = PowerAllocation::new(powers.clone(), 3.0 * k as f64).unwrap();
        let report = rate_report(&ch, &bf, &pa, noise).unwrap();

        let channels: Vec<Vec<(f64, f64)>> = (0..k)
            .map(|u| ch.channel(u).iter().map(|z| (z.re, z.im)).collect())
            .collect();
        let beams: Vec<Vec<(f64, f64)>> = (0..k)
            .map(|j| bf.composed().column(j).iter().map(|z| (z.re, z.im)).collect())
            .collect();
        let (osinr, orates, osum) = naive_rates(&channels, &beams, &powers, noise);
        for u in 0..k {
            let s_tol = 1e-12 * osinr[u].abs().max(1.0);
            assert!(
                (report.sinr[u] - osinr[u]).abs() <= s_tol,
                "trial {trial} user {u}: sinr {} vs oracle {}",
                report.sinr[u],
                osinr[u]
            );
            let r_tol = 1e-12 * orates[u].abs().max(1.0);
            assert!((report.rates[u] - orates[u]).abs() <= r_tol);
        }
        assert!((report.sum_rate - osum).abs() <= 1e-12 * osum.abs().max(1.0));
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "oracle comparison took {elapsed:?}, budget is 5 s"
    );
    println!("ACCEPTANCE 1 (phy oracle equivalence): PASS — 1000 instances, {elapsed:?}");
}

// ── Criterion 2: gradient correctness ──────────────────────────────────────

/// Draw a small net + input whose ReLU pre-activations stay away from the
/// kink so central differences are trustworthy.
fn smooth_net(rng: &mut ChaCha12Rng, act: OutputActivation) -> (Mlp, Array2<f64>) {
    loop {
        let sizes = vec![
            rng.random_range(2..6usize),
            rng.random_range(4..17usize),
            rng.random_range(4..17usize),
            rng.random_range(1..4usize),
        ];
        let mlp = Mlp::new(MlpSpec::new(sizes, act).unwrap(), &mut *rng);
        let input = Array2::from_shape_fn((3, mlp.spec().input_dim()), |_| {
            rng.random_range(-1.2..1.2)
        });
        let (_, tape) = mlp.forward(&input).unwrap();
        if tape.min_abs_preactivation() > 1e-3 {
            return (mlp, input);
        }
    }
}

#[test]
fn criterion_2_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xBEEF);

    // Part 1: forward/backward on small nets (widths <= 16), tolerance 1e-4.
    let acts = [
        OutputActivation::Linear,
        OutputActivation::Softplus,
        OutputActivation::Tanh,
    ];
    for trial in 0..30 {
        let (mlp, input) = smooth_net(&mut rng, acts[trial % acts.len()]);
        let (out, tape) = mlp.forward(&input).unwrap();
        let (grads, _) = mlp.backward(&tape, &out).unwrap();
        let loss = |m: &Mlp| {
            let (y, _) = m.forward(&input).unwrap();
            0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };
        let h = 1e-5;
        for l in 0..mlp.weights().len() {
            let (rows, cols) = mlp.weights()[l].dim();
            for idx in 0..(rows * cols).min(30) {
                let pos = (idx / cols, idx % cols);
                let mut plus = mlp.clone();
                plus.weights_mut()[l][pos] += h;
                let mut minus = mlp.clone();
                minus.weights_mut()[l][pos] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let analytic = grads.weights[l][pos];
                let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-4,
                    "forward/backward FD mismatch: numeric {numeric}, analytic {analytic}"
                );
            }
        }
    }

    // Part 2: critic loss gradients (squared soft-Bellman residual against
    // fixed targets), tolerance 1e-3, widths <= 16.
    use mmw_noma_drl::agents::{actor_loss_and_grads, critic_loss_and_grads, GaussianPolicy};
    let obs_dim = 5;
    let action_dim = 3;
    let hidden = 16;
    let critic = Mlp::new(
        MlpSpec::new(
            vec![obs_dim + action_dim, hidden, hidden, 1],
            OutputActivation::Linear,
        )
        .unwrap(),
        &mut rng,
    );
    let batch = 4;
    let critic_in = Array2::from_shape_fn((batch, obs_dim + action_dim), |_| {
        rng.random_range(-1.0..1.0)
    });
    let targets = Array1::from_shape_fn(batch, |_| rng.random_range(-1.0..1.0));
    let (_, critic_grads) = critic_loss_and_grads(&critic, &critic_in, &targets).unwrap();
    let critic_loss = |c: &Mlp| critic_loss_and_grads(c, &critic_in, &targets).unwrap().0;
    let h = 1e-5;
    for l in 0..critic.weights().len() {
        let (rows, cols) = critic.weights()[l].dim();
        for idx in 0..(rows * cols).min(40) {
            let pos = (idx / cols, idx % cols);
            let mut plus = critic.clone();
            plus.weights_mut()[l][pos] += h;
            let mut minus = critic.clone();
            minus.weights_mut()[l][pos] -= h;
            let numeric = (critic_loss(&plus) - critic_loss(&minus)) / (2.0 * h);
            let analytic = critic_grads.weights[l][pos];
            let denom = numeric.abs().max(analytic.abs()).max(1e-6);
            assert!(
                (numeric - analytic).abs() / denom < 1e-3,
                "critic loss FD mismatch at layer {l} {pos:?}: numeric {numeric}, analytic {analytic}"
            );
        }
    }

    // Part 3: actor loss gradients with fixed reparameterization noise,
    // tolerance 1e-3.
    let policy = GaussianPolicy::new(obs_dim, action_dim, hidden, &mut rng);
    let obs = Array2::from_shape_fn((batch, obs_dim), |_| rng.random_range(-1.0..1.0));
    let noise = Array2::from_shape_fn((batch, action_dim), |_| rng.random_range(-1.0..1.0));
    let temp = 0.2;
    let (_, policy_grads) =
        actor_loss_and_grads(&policy, &critic, None, &obs, &noise, temp).unwrap();
    let actor_loss = |p: &GaussianPolicy| {
        actor_loss_and_grads(p, &critic, None, &obs, &noise, temp)
            .unwrap()
            .0
    };
    let nets: [(&str, &mmw_noma_drl::nn::Gradients, fn(&mut GaussianPolicy) -> &mut Mlp); 3] = [
        ("trunk", &policy_grads.trunk, |p| &mut p.trunk),
        ("mean", &policy_grads.mean_head, |p| &mut p.mean_head),
        ("std", &policy_grads.std_head, |p| &mut p.std_head),
    ];
    let h = 1e-6;
    for (name, grads, extract) in nets {
        for l in 0..grads.weights.len() {
            let (rows, cols) = grads.weights[l].dim();
            for idx in 0..(rows * cols).min(30) {
                let pos = (idx / cols, idx % cols);
                let mut plus = policy.clone();
                extract(&mut plus).weights_mut()[l][pos] += h;
                let mut minus = policy.clone();
                extract(&mut minus).weights_mut()[l][pos] -= h;
                let numeric = (actor_loss(&plus) - actor_loss(&minus)) / (2.0 * h);
                let analytic = grads.weights[l][pos];
                let denom = numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-3,
                    "actor loss FD mismatch ({name}, layer {l}, {pos:?}): numeric {numeric}, analytic {analytic}"
                );
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "gradient checks took {elapsed:?}, budget is 60 s"
    );
    println!("ACCEPTANCE 2 (gradient correctness): PASS — {elapsed:?}");
}

// ── Criterion 3: constraint shaping ────────────────────────────────────────

#[test]
fn criterion_3_constraint_shaping_properties() {
    // Worked boundary examples reproduce exactly.
    assert_eq!(alpha_rate_factor(2.0, 3.0).unwrap(), 2.0 / 3.0);
    assert_eq!(alpha_power_factor(2.0, 1.0), 0.5);

    let soft_cfg = EnvConfig {
        n_users: 2,
        n_antennas: 4,
        power_budget: 2.0,
        noise_var: 1.0,
        min_rates: vec![3.0, 3.0],
        steps_per_episode: 1,
        alpha_mode: AlphaMode::Soft,
        n_paths: 3,
    };
    let mut hard_cfg = soft_cfg.clone();
    hard_cfg.alpha_mode = AlphaMode::Hard;

    let mut rng = ChaCha12Rng::seed_from_u64(0xA1FA);
    for _ in 0..20_000 {
        let rates = [rng.random_range(0.0..7.0), rng.random_range(0.0..7.0)];
        let powers = vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
        let report = RateReport {
            sinr: rates.iter().map(|r| 2f64.powf(*r) - 1.0).collect(),
            rates: rates.to_vec(),
            sum_rate: rates.iter().sum(),
        };
        let pa = PowerAllocation::new(powers, 2.0).unwrap();
        let soft = compute_reward(&report, &pa, &soft_cfg).unwrap();
        let hard = compute_reward(&report, &pa, &hard_cfg).unwrap();
        let product: f64 = soft.alpha_factors.iter().product();
        assert!((soft.alpha - product).abs() < 1e-12, "alpha != product of factors");
        assert!(soft.reward >= hard.reward - 1e-15, "soft < hard");
        assert!(soft.reward <= soft.raw_sum_rate + 1e-15);
        assert!(soft.alpha_factors.iter().all(|a| (0.0..=1.0).contains(a)));
        // Hard alpha is binary and equals 1 exactly on feasibility.
        let feasible =
            rates[0] >= 3.0 && rates[1] >= 3.0 && pa.total() <= pa.budget();
        assert_eq!(hard.alpha == 1.0, feasible);
        assert!(hard.alpha == 0.0 || hard.alpha == 1.0);
    }

    // The worked examples from the reward definition.
    let report = RateReport {
        sinr: vec![2f64.powf(1.5) - 1.0, 15.0],
        rates: vec![1.5, 4.0],
        sum_rate: 5.5,
    };
    let pa = PowerAllocation::new(vec![1.0, 1.0], 2.0).unwrap();
    let soft = compute_reward(&report, &pa, &soft_cfg).unwrap();
    assert!((soft.alpha - 0.5).abs() < 1e-12);
    assert!((soft.reward - 2.75).abs() < 1e-12);

    println!("ACCEPTANCE 3 (constraint shaping): PASS — 20000 randomized instances");
}

// ── Criterion 8: byte-identical reruns ──────────────────────────────────────

#[test]
fn criterion_8_reruns_are_byte_identical() {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 2;
    cfg.steps_per_episode = 30;
    cfg.hidden_width = 16;
    cfg.batch_size = 16;
    cfg.warmup = 16;
    cfg.eval_samples = 50;
    cfg.seeds = vec![11, 12];

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_training(&cfg, dir_a.path()).unwrap();
    run_training(&cfg, dir_b.path()).unwrap();
    for seed in [11, 12] {
        for name in [format!("curve_seed{seed}.csv"), format!("checkpoint_seed{seed}.txt")] {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    let mut sweep_cfg = cfg.clone();
    sweep_cfg.seeds = vec![11];
    sweep_cfg.eval_samples = 30;
    sweep_cfg.sweep = Some(SweepSpec {
        param: SweepParam::SnrDb,
        values: vec![10.0, 30.0],
    });
    let sw_a = tempfile::tempdir().unwrap();
    let sw_b = tempfile::tempdir().unwrap();
    run_sweep(&sweep_cfg, sw_a.path()).unwrap();
    run_sweep(&sweep_cfg, sw_b.path()).unwrap();
    let a = std::fs::read(sw_a.path().join("sweep.csv")).unwrap();
    let b = std::fs::read(sw_b.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep.csv differs between reruns");

    let bl_a = tempfile::tempdir().unwrap();
    let bl_b = tempfile::tempdir().unwrap();
    run_baseline(&cfg, bl_a.path(), 5).unwrap();
    run_baseline(&cfg, bl_b.path(), 5).unwrap();
    let a = std::fs::read(bl_a.path().join("baseline.csv")).unwrap();
    let b = std::fs::read(bl_b.path().join("baseline.csv")).unwrap();
    assert_eq!(a, b, "baseline.csv differs between reruns");

    println!("ACCEPTANCE 8 (determinism): PASS — train/sweep/baseline outputs byte-identical");
}
