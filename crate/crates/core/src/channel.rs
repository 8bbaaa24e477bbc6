//! Spatially sparse mmWave channel generation for a uniform linear array.
//!
//! Each user channel is a sum of a few plane-wave paths, `h_k = Σ_l λ_{k,l} a(N, Ω_{k,l})`,
//! and users are kept sorted by ascending channel norm so that the SIC decoding
//! order downstream is always index order.

use std::io::Write;

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Arguments of the ULA array response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringParams {
    /// Number of antenna elements, N ≥ 1.
    pub n_antennas: usize,
    /// Angle of departure in radians.
    pub angle: f64,
}

impl SteeringParams {
    pub fn new(n_antennas: usize, angle: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::InvalidConfig {
                field: "n_antennas".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !angle.is_finite() {
            return Err(Error::InvalidConfig {
                field: "angle".into(),
                reason: "must be finite".into(),
            });
        }
        Ok(Self { n_antennas, angle })
    }
}

/// One multipath component: complex gain and angle of departure in `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub angle: f64,
}

impl PathComponent {
    pub fn new(gain: Complex64, angle: f64) -> Result<Self> {
        if !gain.re.is_finite() || !gain.im.is_finite() {
            return Err(Error::InvalidConfig {
                field: "gain".into(),
                reason: "must be finite".into(),
            });
        }
        if !(0.0..=std::f64::consts::PI).contains(&angle) {
            return Err(Error::InvalidConfig {
                field: "angle".into(),
                reason: format!("must lie in [0, pi], got {angle}"),
            });
        }
        Ok(Self { gain, angle })
    }
}

/// ULA array response `a(N, Ω)` with entries `e^{jπ m cos Ω}` for `m = 0..N-1`.
pub fn steering_vector(params: &SteeringParams) -> Array1<Complex64> {
    let cos = params.angle.cos();
    Array1::from_iter((0..params.n_antennas).map(|m| {
        let phase = std::f64::consts::PI * m as f64 * cos;
        Complex64::from_polar(1.0, phase)
    }))
}

/// Sum the plane-wave contributions of `paths` into a length-N channel vector.
pub fn synthesize_channel(paths: &[PathComponent], n_antennas: usize) -> Result<Array1<Complex64>> {
    if paths.is_empty() {
        return Err(Error::NoMultipathComponents);
    }
    let mut h = Array1::<Complex64>::zeros(n_antennas);
    for path in paths {
        let sv = steering_vector(&SteeringParams {
            n_antennas,
            angle: path.angle,
        });
        h.zip_mut_with(&sv, |acc, s| *acc += path.gain * s);
    }
    Ok(h)
}

/// One draw of the multi-user channel, users sorted ascending by `‖h_k‖`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    channels: Vec<Array1<Complex64>>,
    paths: Vec<Vec<PathComponent>>,
}

impl ChannelRealization {
    /// Build from per-user path lists; synthesizes each `h_k` and sorts users
    /// by ascending channel norm (ties keep the original draw order).
    pub fn from_paths(paths: Vec<Vec<PathComponent>>, n_antennas: usize) -> Result<Self> {
        let mut entries: Vec<(Array1<Complex64>, Vec<PathComponent>)> = paths
            .into_iter()
            .map(|p| synthesize_channel(&p, n_antennas).map(|h| (h, p)))
            .collect::<Result<_>>()?;
        entries.sort_by(|a, b| {
            let na = vec_norm(&a.0);
            let nb = vec_norm(&b.0);
            na.partial_cmp(&nb).expect("channel norms are finite")
        });
        let (channels, paths) = entries.into_iter().unzip();
        Ok(Self { channels, paths })
    }

    pub fn n_users(&self) -> usize {
        self.channels.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.channels.first().map_or(0, Array1::len)
    }

    /// Channel vector of user `k` (0-indexed, ascending norm order).
    pub fn channel(&self, k: usize) -> &Array1<Complex64> {
        &self.channels[k]
    }

    pub fn channels(&self) -> &[Array1<Complex64>] {
        &self.channels
    }

    /// Multipath components backing user `k`'s channel.
    pub fn paths(&self, k: usize) -> &[PathComponent] {
        &self.paths[k]
    }

    pub fn norms(&self) -> Vec<f64> {
        self.channels.iter().map(vec_norm).collect()
    }
}

pub fn vec_norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Random channel model: fixed number of paths per user, complex Gaussian
/// gains with per-path variance `1/n_paths` (so `E‖h_k‖² = N`), angles
/// uniform on `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub n_paths: usize,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self { n_paths: 3 }
    }
}

impl ChannelModel {
    /// Draw one realization for `n_users` users using the supplied generator.
    pub fn draw_with<R: Rng>(
        &self,
        n_users: usize,
        n_antennas: usize,
        rng: &mut R,
    ) -> Result<ChannelRealization> {
        if n_users == 0 {
            return Err(Error::InvalidConfig {
                field: "n_users".into(),
                reason: "must be at least 1".into(),
            });
        }
        if n_users > n_antennas {
            return Err(Error::MoreUsersThanAntennas {
                n_users,
                n_antennas,
            });
        }
        let gain_std = (1.0 / (2.0 * self.n_paths as f64)).sqrt();
        let mut all_paths = Vec::with_capacity(n_users);
        for _ in 0..n_users {
            let mut user_paths = Vec::with_capacity(self.n_paths);
            for _ in 0..self.n_paths {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
                user_paths.push(PathComponent {
                    gain: Complex64::new(re * gain_std, im * gain_std),
                    angle,
                });
            }
            all_paths.push(user_paths);
        }
        ChannelRealization::from_paths(all_paths, n_antennas)
    }
}

/// Seeded one-shot draw; identical seeds give identical realizations.
pub fn draw_channel_set(
    n_users: usize,
    n_antennas: usize,
    n_paths: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    ChannelModel { n_paths }.draw_with(n_users, n_antennas, &mut rng)
}

/// Dump one realization as comma-separated records, one per (user, path).
pub fn write_channel_dump<W: Write>(w: &mut W, ch: &ChannelRealization) -> Result<()> {
    writeln!(w, "user_index,path_index,gain_re,gain_im,angle")?;
    for k in 0..ch.n_users() {
        for (l, path) in ch.paths(k).iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k, l, path.gain.re, path.gain.im, path.angle
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_complex_close(a: Complex64, b: Complex64, tol: f64) {
        assert!(
            (a - b).norm() < tol,
            "expected {b}, got {a} (|diff| = {})",
            (a - b).norm()
        );
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let sv = steering_vector(&SteeringParams::new(4, std::f64::consts::FRAC_PI_2).unwrap());
        assert_eq!(sv.len(), 4);
        for z in sv.iter() {
            assert_complex_close(*z, Complex64::new(1.0, 0.0), 1e-12);
        }
    }

    #[test]
    fn steering_endfire_alternates_sign() {
        let sv = steering_vector(&SteeringParams::new(2, 0.0).unwrap());
        assert_complex_close(sv[0], Complex64::new(1.0, 0.0), 1e-12);
        assert_complex_close(sv[1], Complex64::new(-1.0, 0.0), 1e-12);
    }

    #[test]
    fn steering_single_antenna_is_one() {
        let sv = steering_vector(&SteeringParams::new(1, 1.234).unwrap());
        assert_eq!(sv.len(), 1);
        assert_complex_close(sv[0], Complex64::new(1.0, 0.0), 1e-15);
    }

    #[test]
    fn synthesize_single_path_scales_steering() {
        let paths = [PathComponent::new(Complex64::new(2.0, 0.0), std::f64::consts::FRAC_PI_2)
            .unwrap()];
        let h = synthesize_channel(&paths, 2).unwrap();
        assert_complex_close(h[0], Complex64::new(2.0, 0.0), 1e-12);
        assert_complex_close(h[1], Complex64::new(2.0, 0.0), 1e-12);
    }

    #[test]
    fn synthesize_two_paths_hand_sum() {
        // a(2, pi/2) = [1, 1]; a(2, 0) = [1, -1]; sum = [2, 0].
        let paths = [
            PathComponent::new(Complex64::new(1.0, 0.0), std::f64::consts::FRAC_PI_2).unwrap(),
            PathComponent::new(Complex64::new(1.0, 0.0), 0.0).unwrap(),
        ];
        let h = synthesize_channel(&paths, 2).unwrap();
        assert_complex_close(h[0], Complex64::new(2.0, 0.0), 1e-12);
        assert_complex_close(h[1], Complex64::new(0.0, 0.0), 1e-12);
    }

    #[test]
    fn synthesize_zero_gain_is_zero_vector() {
        let paths = [PathComponent::new(Complex64::new(0.0, 0.0), 0.7).unwrap()];
        let h = synthesize_channel(&paths, 4).unwrap();
        for z in h.iter() {
            assert_complex_close(*z, Complex64::new(0.0, 0.0), 1e-15);
        }
    }

    #[test]
    fn synthesize_empty_paths_errors() {
        let err = synthesize_channel(&[], 4).unwrap_err();
        assert!(matches!(err, Error::NoMultipathComponents));
    }

    #[test]
    fn draw_is_deterministic_for_a_seed() {
        let a = draw_channel_set(2, 4, 3, 42).unwrap();
        let b = draw_channel_set(2, 4, 3, 42).unwrap();
        for k in 0..2 {
            assert_eq!(a.channel(k), b.channel(k));
            assert_eq!(a.paths(k), b.paths(k));
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = draw_channel_set(2, 4, 3, 1).unwrap();
        let b = draw_channel_set(2, 4, 3, 2).unwrap();
        assert!(a
            .norms()
            .iter()
            .zip(b.norms())
            .any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn draw_sorts_users_by_norm() {
        for seed in 0..20 {
            let ch = draw_channel_set(4, 8, 3, seed).unwrap();
            let norms = ch.norms();
            for w in norms.windows(2) {
                assert!(w[0] <= w[1], "norms not ascending: {norms:?}");
            }
        }
    }

    #[test]
    fn draw_channels_resynthesize_from_stored_paths() {
        let ch = draw_channel_set(2, 4, 3, 7).unwrap();
        for k in 0..2 {
            let re = synthesize_channel(ch.paths(k), 4).unwrap();
            for (a, b) in re.iter().zip(ch.channel(k)) {
                assert_complex_close(*a, *b, 1e-12);
            }
        }
    }

    #[test]
    fn more_users_than_antennas_errors() {
        let err = draw_channel_set(5, 4, 3, 0).unwrap_err();
        assert!(matches!(err, Error::MoreUsersThanAntennas { .. }));
    }

    #[test]
    fn normalization_makes_mean_square_norm_close_to_n() {
        // E‖h‖² = N under the 1/L gain variance convention.
        let n = 8;
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let model = ChannelModel::default();
        let mut acc = 0.0;
        let draws = 4000;
        for _ in 0..draws {
            let ch = model.draw_with(1, n, &mut rng).unwrap();
            acc += ch.norms()[0].powi(2);
        }
        let mean = acc / draws as f64;
        assert_abs_diff_eq!(mean, n as f64, epsilon = 0.5);
    }

    #[test]
    fn dump_has_one_record_per_user_path() {
        let ch = draw_channel_set(3, 4, 3, 5).unwrap();
        let mut buf = Vec::new();
        write_channel_dump(&mut buf, &ch).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "user_index,path_index,gain_re,gain_im,angle");
        assert_eq!(lines.len(), 1 + 3 * 3);
        // Records parse back to the stored paths.
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[1], "0");
        assert_eq!(first[2].parse::<f64>().unwrap(), ch.paths(0)[0].gain.re);
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_modulus(n in 1usize..64, angle in 0.0..std::f64::consts::PI) {
            let sv = steering_vector(&SteeringParams::new(n, angle).unwrap());
            for z in sv.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn synthesis_is_linear_in_paths(
            n in 1usize..16,
            ga in -2.0..2.0f64, gb in -2.0..2.0f64,
            aa in 0.0..std::f64::consts::PI, ab in 0.0..std::f64::consts::PI,
        ) {
            let pa = PathComponent::new(Complex64::new(ga, gb), aa).unwrap();
            let pb = PathComponent::new(Complex64::new(gb, ga), ab).unwrap();
            let joint = synthesize_channel(&[pa, pb], n).unwrap();
            let ha = synthesize_channel(&[pa], n).unwrap();
            let hb = synthesize_channel(&[pb], n).unwrap();
            for i in 0..n {
                prop_assert!((joint[i] - (ha[i] + hb[i])).norm() < 1e-12);
            }
        }

        #[test]
        fn drawn_set_keeps_invariants(seed in 0u64..500, k in 1usize..4) {
            let ch = draw_channel_set(k, 8, 3, seed).unwrap();
            let norms = ch.norms();
            for w in norms.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for u in 0..k {
                let re = synthesize_channel(ch.paths(u), 8).unwrap();
                for (a, b) in re.iter().zip(ch.channel(u)) {
                    prop_assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }
}
