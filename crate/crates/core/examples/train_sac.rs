//! Short soft-actor-critic training run on a small system, printing the
//! learning curve tail and writing the CSV.
//!
//! Run with: `cargo run --release --example train_sac`
//! (takes around a minute)

use mmw_noma_drl::agents::{train, SacAgent};
use mmw_noma_drl::env::NomaEnv;
use mmw_noma_drl::harness::ExperimentConfig;

fn main() -> mmw_noma_drl::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 20;
    let seed = 1;

    let env_cfg = cfg.env_config();
    let mut env = NomaEnv::new(env_cfg.clone(), seed)?;
    let mut agent = SacAgent::new(
        env_cfg.obs_dim(),
        env_cfg.action_dim(),
        cfg.sac_config(),
        seed,
    );

    println!(
        "training SAC: K={}, N={}, {} episodes x {} steps",
        cfg.n_users, cfg.n_antennas, cfg.episodes, cfg.steps_per_episode
    );
    let curve = train(&mut agent, &mut env, cfg.episodes, cfg.moving_avg_len)?;
    for p in curve.points.iter().rev().take(5).rev() {
        println!(
            "episode {:>3}: mean reward {:7.3}, moving avg {:7.3}",
            p.episode, p.mean_reward, p.moving_avg
        );
    }

    let path = std::env::temp_dir().join("sac_curve.csv");
    let mut file = std::fs::File::create(&path)?;
    curve.write_csv(&mut file)?;
    println!("wrote {}", path.display());
    Ok(())
}
