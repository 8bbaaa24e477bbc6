//! Hybrid beamformer feasibility projection and SIC-ordered SINR/rate arithmetic.
//!
//! The analog stage is constrained to constant-modulus entries `|A_{i,j}| = 1/√N`
//! and the composed columns `w_k` of `W = A·D` to unit norm. Users are assumed
//! sorted ascending by channel norm, so user `k` sees only users `k+1..K` as
//! interference after SIC.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Analog + digital beamformer pair with the composed matrix `W = A·D`.
///
/// Construct via [`project_beamformer`]; both feasibility invariants
/// (constant-modulus analog entries, unit-norm composed columns) hold on
/// every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    analog: Array2<Complex64>,
    digital: Array2<Complex64>,
    composed: Array2<Complex64>,
}

impl HybridBeamformer {
    pub fn n_antennas(&self) -> usize {
        self.analog.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.analog.ncols()
    }

    pub fn analog(&self) -> &Array2<Complex64> {
        &self.analog
    }

    pub fn digital(&self) -> &Array2<Complex64> {
        &self.digital
    }

    pub fn composed(&self) -> &Array2<Complex64> {
        &self.composed
    }

    /// Composed beamforming column `w_k`.
    pub fn column(&self, k: usize) -> Array1<Complex64> {
        self.composed.column(k).to_owned()
    }
}

/// Per-user transmit powers and the nominal budget.
///
/// `Σ p_k ≤ budget` is deliberately not enforced here; the environment
/// handles over-budget allocations through the soft reward factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    powers: Vec<f64>,
    budget: f64,
}

impl PowerAllocation {
    pub fn new(powers: Vec<f64>, budget: f64) -> Result<Self> {
        if budget <= 0.0 || !budget.is_finite() {
            return Err(Error::InvalidConfig {
                field: "budget".into(),
                reason: format!("must be positive and finite, got {budget}"),
            });
        }
        if let Some(p) = powers.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidConfig {
                field: "powers".into(),
                reason: format!("must be non-negative and finite, got {p}"),
            });
        }
        Ok(Self { powers, budget })
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn power(&self, k: usize) -> f64 {
        self.powers[k]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn n_users(&self) -> usize {
        self.powers.len()
    }
}

/// Per-user SINR (linear), per-user rate, and the sum-rate in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

const ZERO_COLUMN_EPS: f64 = 1e-30;

/// Map arbitrary raw matrices onto the feasible set: analog entries are
/// rescaled to modulus `1/√N` preserving phase (zero entries get phase 0),
/// then each digital column is rescaled so the composed column has unit
/// norm. A composed column that vanishes numerically falls back to the
/// unit basis column `e_k` in the digital stage.
pub fn project_beamformer(
    raw_analog: &Array2<Complex64>,
    raw_digital: &Array2<Complex64>,
) -> HybridBeamformer {
    let n = raw_analog.nrows();
    let k = raw_analog.ncols();
    assert_eq!(
        raw_digital.nrows(),
        k,
        "digital rows must match analog columns"
    );
    assert_eq!(raw_digital.ncols(), k, "digital matrix must be K x K");

    let target_mod = 1.0 / (n as f64).sqrt();
    let analog = raw_analog.mapv(|z| {
        let m = z.norm();
        if m == 0.0 {
            Complex64::new(target_mod, 0.0)
        } else {
            z * (target_mod / m)
        }
    });

    let mut digital = raw_digital.clone();
    // First pass: vanishing composed columns fall back to e_k in the digital stage.
    let probe = analog.dot(&digital);
    for col in 0..k {
        let norm = column_norm(&probe, col);
        if norm <= ZERO_COLUMN_EPS {
            let mut d = digital.column_mut(col);
            d.fill(Complex64::new(0.0, 0.0));
            d[col] = Complex64::new(1.0, 0.0);
        }
    }
    // Second pass: rescale each digital column so the composed column is unit norm.
    let probe = analog.dot(&digital);
    for col in 0..k {
        let norm = column_norm(&probe, col);
        let scale = Complex64::new(1.0 / norm, 0.0);
        digital.column_mut(col).mapv_inplace(|z| z * scale);
    }
    let composed = analog.dot(&digital);

    HybridBeamformer {
        analog,
        digital,
        composed,
    }
}

fn column_norm(m: &Array2<Complex64>, col: usize) -> f64 {
    m.column(col).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner_product_sq(h: &Array1<Complex64>, w: ndarray::ArrayView1<Complex64>) -> f64 {
    h.iter()
        .zip(w.iter())
        .map(|(hi, wi)| hi.conj() * wi)
        .sum::<Complex64>()
        .norm_sqr()
}

/// SINR of user `k` (0-indexed) under the SIC ordering: only users with a
/// higher index contribute interference.
pub fn sinr(
    channels: &ChannelRealization,
    bf: &HybridBeamformer,
    pa: &PowerAllocation,
    noise_var: f64,
    user: usize,
) -> Result<f64> {
    let n_users = channels.n_users();
    if user >= n_users {
        return Err(Error::UserOutOfRange { user, n_users });
    }
    let h = channels.channel(user);
    let signal = inner_product_sq(h, bf.composed.column(user)) * pa.power(user);
    let mut interference = 0.0;
    for other in user + 1..n_users {
        interference += inner_product_sq(h, bf.composed.column(other)) * pa.power(other);
    }
    Ok(signal / (interference + noise_var))
}

/// Per-user rates `log2(1 + SINR_k)` and their sum.
pub fn rate_report(
    channels: &ChannelRealization,
    bf: &HybridBeamformer,
    pa: &PowerAllocation,
    noise_var: f64,
) -> Result<RateReport> {
    let n_users = channels.n_users();
    let mut sinrs = Vec::with_capacity(n_users);
    let mut rates = Vec::with_capacity(n_users);
    for k in 0..n_users {
        let s = sinr(channels, bf, pa, noise_var, k)?;
        sinrs.push(s);
        rates.push((1.0 + s).log2());
    }
    let sum_rate = rates.iter().sum();
    Ok(RateReport {
        sinr: sinrs,
        rates,
        sum_rate,
    })
}
