//! Miniature minimum-rate sweep: trains a small policy per grid point and
//! compares it with both baselines on shared evaluation channels.
//!
//! Run with: `cargo run --release --example sweep_min_rate`
//! (takes a few minutes: it trains one policy per sweep value)

use mmw_noma_drl::harness::{run_sweep, ExperimentConfig, SweepParam, SweepSpec};

fn main() -> mmw_noma_drl::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.episodes = 10;
    cfg.eval_samples = 500;
    cfg.seeds = vec![1];
    cfg.sweep = Some(SweepSpec {
        param: SweepParam::MinRate,
        values: vec![1.0, 2.5, 4.0],
    });

    let out_dir = std::env::temp_dir().join("min_rate_sweep");
    let rows = run_sweep(&cfg, &out_dir)?;
    println!("{:>8} {:>22} {:>14}", "min_rate", "method", "mean sum-rate");
    for row in &rows {
        println!(
            "{:>8} {:>22} {:>14.3}",
            row.value, row.method, row.mean_sum_rate
        );
    }
    println!("full table: {}", out_dir.join("sweep.csv").display());
    Ok(())
}
