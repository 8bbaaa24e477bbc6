//! How the constraint factors shape the reward: soft ratios versus the hard
//! all-or-nothing variant on the same operating points.
//!
//! Run with: `cargo run --release --example reward_shaping`

use mmw_noma_drl::env::{compute_reward, AlphaMode, EnvConfig};
use mmw_noma_drl::phy::{PowerAllocation, RateReport};

fn report_for(rates: &[f64]) -> RateReport {
    RateReport {
        sinr: rates.iter().map(|r| 2f64.powf(*r) - 1.0).collect(),
        rates: rates.to_vec(),
        sum_rate: rates.iter().sum(),
    }
}

fn main() -> mmw_noma_drl::Result<()> {
    let mut cfg = EnvConfig {
        n_users: 2,
        n_antennas: 8,
        power_budget: 2.0,
        noise_var: 1.0,
        min_rates: vec![3.0, 3.0],
        steps_per_episode: 1,
        alpha_mode: AlphaMode::Soft,
        n_paths: 3,
    };

    let cases = [
        ("feasible", vec![3.2, 4.0], vec![0.9, 1.0]),
        ("weak user short of its rate", vec![1.5, 4.0], vec![0.9, 1.0]),
        ("over the power budget", vec![3.2, 4.0], vec![1.5, 1.5]),
        ("both violated", vec![1.5, 4.0], vec![1.5, 1.5]),
    ];

    println!("{:<28} {:>10} {:>10} {:>10}", "case", "sum-rate", "soft", "hard");
    for (name, rates, powers) in cases {
        let report = report_for(&rates);
        let pa = PowerAllocation::new(powers, cfg.power_budget)?;
        cfg.alpha_mode = AlphaMode::Soft;
        let soft = compute_reward(&report, &pa, &cfg)?;
        cfg.alpha_mode = AlphaMode::Hard;
        let hard = compute_reward(&report, &pa, &cfg)?;
        println!(
            "{:<28} {:>10.3} {:>10.3} {:>10.3}",
            name, report.sum_rate, soft.reward, hard.reward
        );
        println!(
            "{:<28} alpha factors = {:?}",
            "",
            soft.alpha_factors
                .iter()
                .map(|a| (a * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
