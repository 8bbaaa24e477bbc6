//! Verify the analytic backpropagation against central finite differences
//! on a small network.
//!
//! Run with: `cargo run --release --example gradient_check`

use mmw_noma_drl::nn::{Mlp, MlpSpec, OutputActivation};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() -> mmw_noma_drl::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let spec = MlpSpec::new(vec![4, 12, 12, 3], OutputActivation::Softplus)?;
    let mlp = Mlp::new(spec, &mut rng);
    let input = Array2::from_shape_fn((2, 4), |_| rng.random_range(-1.0..1.0));

    // Loss = 1/2 ||forward(x)||^2, so the output gradient is the output itself.
    let (out, tape) = mlp.forward(&input)?;
    let (grads, _) = mlp.backward(&tape, &out)?;

    let loss = |m: &Mlp| {
        let (y, _) = m.forward(&input).unwrap();
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    };

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for l in 0..mlp.weights().len() {
        let (rows, cols) = mlp.weights()[l].dim();
        for idx in 0..rows * cols {
            let pos = (idx / cols, idx % cols);
            let mut plus = mlp.clone();
            plus.weights_mut()[l][pos] += h;
            let mut minus = mlp.clone();
            minus.weights_mut()[l][pos] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let analytic = grads.weights[l][pos];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    println!("checked {checked} weight partials, worst relative error = {worst:.3e}");
    assert!(worst < 1e-4, "gradient check failed");
    println!("analytic gradients agree with finite differences");
    Ok(())
}
