//! Project a raw hybrid beamformer onto the feasible set and score the
//! SIC-ordered per-user rates.
//!
//! Run with: `cargo run --release --example beamforming_rates`

use mmw_noma_drl::channel::draw_channel_set;
use mmw_noma_drl::phy::{project_beamformer, rate_report, PowerAllocation};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() -> mmw_noma_drl::Result<()> {
    let n = 8;
    let k = 2;
    let ch = draw_channel_set(k, n, 3, 7)?;

    // Arbitrary raw matrices stand in for an agent's action here.
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let raw_analog =
        Array2::from_shape_fn((n, k), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let raw_digital =
        Array2::from_shape_fn((k, k), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let bf = project_beamformer(&raw_analog, &raw_digital);

    println!("analog entry modulus (all equal 1/sqrt(N) = {:.4}):", 1.0 / (n as f64).sqrt());
    println!("  |A[0,0]| = {:.4}", bf.analog()[(0, 0)].norm());
    for col in 0..k {
        let norm: f64 = bf.composed().column(col).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        println!("  ||w_{col}|| = {norm:.6}");
    }

    let budget = 1000.0; // 30 dB over unit noise
    let pa = PowerAllocation::new(vec![700.0, 300.0], budget)?;
    let report = rate_report(&ch, &bf, &pa, 1.0)?;
    for user in 0..k {
        println!(
            "user {user}: SINR = {:10.3}, rate = {:6.3} bits/s/Hz",
            report.sinr[user], report.rates[user]
        );
    }
    println!("sum rate = {:.3} bits/s/Hz", report.sum_rate);
    Ok(())
}
