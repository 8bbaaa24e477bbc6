//! Analytic comparison methods: orthogonal time sharing (TDMA) and a
//! strongest-path NOMA heuristic that beamforms only toward each user's
//! largest-gain multipath component and grid-searches the power split.

use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::{steering_vector, ChannelRealization, SteeringParams};
use crate::env::alpha_rate_factor;
use crate::error::Result;
use crate::phy::{project_beamformer, rate_report, HybridBeamformer, PowerAllocation, RateReport};

/// Orthogonal baseline: each user gets the full budget and a matched-filter
/// beam in its `1/K` time share, so the average rate is
/// `(1/K) Σ log2(1 + P‖h_k‖²/σ²)`.
pub fn tdma_sum_rate(channels: &ChannelRealization, power_budget: f64, noise_var: f64) -> f64 {
    let k = channels.n_users() as f64;
    channels
        .norms()
        .iter()
        .map(|norm| (1.0 + power_budget * norm * norm / noise_var).log2())
        .sum::<f64>()
        / k
}

/// Power-grid resolution: the nominal 1% step is kept up to K = 3; beyond
/// that the simplex enumeration would explode combinatorially, so the step
/// coarsens.
fn grid_steps(n_users: usize) -> usize {
    match n_users {
        0..=3 => 100,
        4..=5 => 20,
        _ => 10,
    }
}

/// Beamformer used by the strongest-path heuristic: analog column `k`
/// phase-matches user `k`'s largest-|λ| path (under the `h^H w` convention
/// the matched beam is the steering vector itself, so the conjugated channel
/// phases cancel), digital starts as identity, both passed through the
/// feasibility projection.
pub fn strongest_path_beamformer(channels: &ChannelRealization) -> HybridBeamformer {
    let n = channels.n_antennas();
    let k = channels.n_users();
    let mut raw_analog = Array2::<Complex64>::zeros((n, k));
    for user in 0..k {
        let paths = channels.paths(user);
        let mut best = 0;
        for (i, p) in paths.iter().enumerate().skip(1) {
            if p.gain.norm_sqr() > paths[best].gain.norm_sqr() {
                best = i;
            }
        }
        let sv = steering_vector(&SteeringParams {
            n_antennas: n,
            angle: paths[best].angle,
        });
        for (i, z) in sv.iter().enumerate() {
            raw_analog[(i, user)] = *z;
        }
    }
    project_beamformer(&raw_analog, &Array2::eye(k))
}

struct GridSearch<'a> {
    gains: Vec<Vec<f64>>,
    min_rates: &'a [f64],
    noise_var: f64,
    step: f64,
    n_users: usize,
    best_reward: f64,
    best_counts: Vec<usize>,
}

impl GridSearch<'_> {
    /// Soft reward of one power assignment; the power factor is 1 by
    /// construction since the enumeration never leaves the simplex.
    fn soft_reward(&self, counts: &[usize]) -> f64 {
        let mut alpha = 1.0;
        let mut sum_rate = 0.0;
        for k in 0..self.n_users {
            let signal = self.gains[k][k] * counts[k] as f64 * self.step;
            let mut denom = self.noise_var;
            for j in k + 1..self.n_users {
                denom += self.gains[k][j] * counts[j] as f64 * self.step;
            }
            let rate = (1.0 + signal / denom).log2();
            sum_rate += rate;
            alpha *= alpha_rate_factor(rate, self.min_rates[k]).expect("positive min rates");
        }
        alpha * sum_rate
    }

    fn search(&mut self, user: usize, remaining: usize, counts: &mut Vec<usize>) {
        if user == self.n_users {
            let reward = self.soft_reward(counts);
            if reward > self.best_reward {
                self.best_reward = reward;
                self.best_counts = counts.clone();
            }
            return;
        }
        for take in 0..=remaining {
            counts.push(take);
            self.search(user + 1, remaining - take, counts);
            counts.pop();
        }
    }
}

/// Strongest-path NOMA: fixed heuristic beamformer plus an exhaustive power
/// grid search (step `P/grid_steps`) maximizing the soft constraint-weighted
/// reward. Deterministic: ties keep the first assignment in enumeration
/// order.
pub fn strongest_path_noma(
    channels: &ChannelRealization,
    power_budget: f64,
    noise_var: f64,
    min_rates: &[f64],
) -> Result<RateReport> {
    let n_users = channels.n_users();
    assert_eq!(min_rates.len(), n_users, "one minimum rate per user");
    let bf = strongest_path_beamformer(channels);

    let mut gains = vec![vec![0.0; n_users]; n_users];
    for k in 0..n_users {
        let h = channels.channel(k);
        for j in 0..n_users {
            let ip = h
                .iter()
                .zip(bf.composed().column(j))
                .map(|(hi, wi)| hi.conj() * wi)
                .sum::<Complex64>();
            gains[k][j] = ip.norm_sqr();
        }
    }

    let steps = grid_steps(n_users);
    let step = power_budget / steps as f64;
    let mut grid = GridSearch {
        gains,
        min_rates,
        noise_var,
        step,
        n_users,
        best_reward: f64::NEG_INFINITY,
        best_counts: vec![0; n_users],
    };
    grid.search(0, steps, &mut Vec::with_capacity(n_users));

    let powers: Vec<f64> = grid.best_counts.iter().map(|c| *c as f64 * step).collect();
    let pa = PowerAllocation::new(powers, power_budget)?;
    rate_report(channels, &bf, &pa, noise_var)
}
