//! TDMA versus strongest-path NOMA over a stream of seeded channel draws.
//!
//! Run with: `cargo run --release --example compare_baselines`

use mmw_noma_drl::baselines::{strongest_path_noma, tdma_sum_rate};
use mmw_noma_drl::channel::draw_channel_set;

fn main() -> mmw_noma_drl::Result<()> {
    let n = 8;
    let k = 2;
    let budget = 1000.0;
    let noise = 1.0;
    let min_rates = [3.0, 3.0];

    let draws = 500;
    let mut tdma_acc = 0.0;
    let mut noma_acc = 0.0;
    for seed in 0..draws {
        let ch = draw_channel_set(k, n, 3, seed)?;
        tdma_acc += tdma_sum_rate(&ch, budget, noise);
        noma_acc += strongest_path_noma(&ch, budget, noise, &min_rates)?.sum_rate;
    }
    println!("mean over {draws} channel draws (K={k}, N={n}, 30 dB):");
    println!("  tdma                : {:.3} bits/s/Hz", tdma_acc / draws as f64);
    println!("  strongest-path noma : {:.3} bits/s/Hz", noma_acc / draws as f64);

    let ch = draw_channel_set(k, n, 3, 0)?;
    let report = strongest_path_noma(&ch, budget, noise, &min_rates)?;
    println!("single draw detail (seed 0): per-user rates = {:?}", report.rates);
    Ok(())
}
