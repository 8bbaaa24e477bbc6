//! Train SAC and DDPG on the same small system and compare curves.
//!
//! Run with: `cargo run --release --example sac_vs_ddpg`
//! (takes a couple of minutes)

use mmw_noma_drl::agents::{train, DdpgAgent, SacAgent};
use mmw_noma_drl::env::NomaEnv;
use mmw_noma_drl::harness::ExperimentConfig;

fn main() -> mmw_noma_drl::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 20;
    let seed = 1;
    let env_cfg = cfg.env_config();

    let mut env = NomaEnv::new(env_cfg.clone(), seed)?;
    let mut sac = SacAgent::new(
        env_cfg.obs_dim(),
        env_cfg.action_dim(),
        cfg.sac_config(),
        seed,
    );
    let sac_curve = train(&mut sac, &mut env, cfg.episodes, cfg.moving_avg_len)?;

    let mut env = NomaEnv::new(env_cfg.clone(), seed)?;
    let mut ddpg = DdpgAgent::new(
        env_cfg.obs_dim(),
        env_cfg.action_dim(),
        cfg.ddpg_config(),
        seed,
    );
    let ddpg_curve = train(&mut ddpg, &mut env, cfg.episodes, cfg.moving_avg_len)?;

    println!("{:>8} {:>12} {:>12}", "episode", "sac avg", "ddpg avg");
    for (s, d) in sac_curve.points.iter().zip(&ddpg_curve.points) {
        if s.episode % 4 == 0 {
            println!("{:>8} {:>12.3} {:>12.3}", s.episode, s.moving_avg, d.moving_avg);
        }
    }
    println!(
        "final moving averages: sac {:.3}, ddpg {:.3}",
        sac_curve.final_moving_avg().unwrap_or(0.0),
        ddpg_curve.final_moving_avg().unwrap_or(0.0)
    );
    Ok(())
}
