//! Actor networks: a squashed-Gaussian stochastic policy (mean path and
//! softplus std path over a shared trunk) and its deterministic counterpart.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::nn::{softplus, AdamState, Gradients, Mlp, MlpSpec, OutputActivation, Tape};

/// Post-softplus clamp keeping the policy std strictly positive and bounded.
pub const STD_MIN: f64 = 1e-6;
pub const STD_MAX: f64 = 10.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln(1 - tanh²(u))` computed without cancellation.
pub fn ln_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Stochastic policy `a = tanh(μ(s) + σ(s)·ε)`.
///
/// The trunk is one dense+ReLU layer; each head is dense+ReLU followed by a
/// final dense layer, linear for the mean and softplus for the std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub trunk: Mlp,
    pub mean_head: Mlp,
    pub std_head: Mlp,
}

/// Everything one batched policy evaluation produced, kept for backprop.
#[derive(Debug)]
pub(crate) struct PolicyEval {
    pub trunk_tape: Tape,
    pub mean_tape: Tape,
    pub std_tape: Tape,
    #[cfg_attr(not(test), allow(dead_code))]
    pub mean: Array2<f64>,
    /// Softplus output before clamping.
    pub std_raw: Array2<f64>,
    /// Clamped std actually used for sampling.
    pub std: Array2<f64>,
    pub noise: Array2<f64>,
    /// Pre-squash sample `μ + σ·ε`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub pre_squash: Array2<f64>,
    /// Squashed action `tanh(u)`.
    pub action: Array2<f64>,
    /// Per-row log density of the squashed action.
    pub log_prob: Array1<f64>,
}

/// Gradients for the three component networks of a policy.
#[derive(Debug)]
pub struct PolicyGradients {
    pub trunk: Gradients,
    pub mean_head: Gradients,
    pub std_head: Gradients,
}

/// Adam accumulators for the three component networks.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAdam {
    pub trunk: AdamState,
    pub mean_head: AdamState,
    pub std_head: AdamState,
}

impl GaussianPolicy {
    pub fn new<R: Rng>(obs_dim: usize, action_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let trunk = Mlp::new(
            MlpSpec::new(vec![obs_dim, hidden], OutputActivation::Relu).expect("sizes"),
            rng,
        );
        let mean_head = Mlp::new(
            MlpSpec::new(vec![hidden, hidden, action_dim], OutputActivation::Linear)
                .expect("sizes"),
            rng,
        );
        let std_head = Mlp::new(
            MlpSpec::new(vec![hidden, hidden, action_dim], OutputActivation::Softplus)
                .expect("sizes"),
            rng,
        );
        Self {
            trunk,
            mean_head,
            std_head,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.spec().input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.mean_head.spec().output_dim()
    }

    pub fn adam(&self, learn_rate: f64) -> PolicyAdam {
        PolicyAdam {
            trunk: AdamState::new(&self.trunk, learn_rate),
            mean_head: AdamState::new(&self.mean_head, learn_rate),
            std_head: AdamState::new(&self.std_head, learn_rate),
        }
    }

    /// Batched evaluation with caller-supplied standard-normal noise.
    pub(crate) fn eval(&self, obs: &Array2<f64>, noise: Array2<f64>) -> Result<PolicyEval> {
        let (features, trunk_tape) = self.trunk.forward(obs)?;
        let (mean, mean_tape) = self.mean_head.forward(&features)?;
        let (std_raw, std_tape) = self.std_head.forward(&features)?;
        let std = std_raw.mapv(|s| s.clamp(STD_MIN, STD_MAX));
        let pre_squash = &mean + &(&std * &noise);
        let action = pre_squash.mapv(f64::tanh);
        let mut log_prob = Array1::zeros(obs.nrows());
        for row in 0..obs.nrows() {
            let mut lp = 0.0;
            for d in 0..self.action_dim() {
                let eps = noise[(row, d)];
                lp += -HALF_LN_2PI - std[(row, d)].ln() - 0.5 * eps * eps
                    - ln_one_minus_tanh_sq(pre_squash[(row, d)]);
            }
            log_prob[row] = lp;
        }
        Ok(PolicyEval {
            trunk_tape,
            mean_tape,
            std_tape,
            mean,
            std_raw,
            std,
            noise,
            pre_squash,
            action,
            log_prob,
        })
    }

    /// Deterministic action `tanh(μ(s))` for a batch.
    pub fn mean_action(&self, obs: &Array2<f64>) -> Result<Array2<f64>> {
        let (features, _) = self.trunk.forward(obs)?;
        let (mean, _) = self.mean_head.forward(&features)?;
        Ok(mean.mapv(f64::tanh))
    }

    /// Backpropagate losses expressed as gradients w.r.t. the mean and the
    /// (clamped) std. The clamp contributes zero gradient outside its range.
    pub(crate) fn backward(
        &self,
        eval: &PolicyEval,
        d_mean: &Array2<f64>,
        d_std: &Array2<f64>,
    ) -> Result<PolicyGradients> {
        let mut d_std_raw = d_std.clone();
        ndarray::Zip::from(&mut d_std_raw)
            .and(&eval.std_raw)
            .for_each(|g, &raw| {
                if !(STD_MIN..=STD_MAX).contains(&raw) {
                    *g = 0.0;
                }
            });
        let (mean_grads, d_feat_mean) = self.mean_head.backward(&eval.mean_tape, d_mean)?;
        let (std_grads, d_feat_std) = self.std_head.backward(&eval.std_tape, &d_std_raw)?;
        let d_features = d_feat_mean + d_feat_std;
        let (trunk_grads, _) = self.trunk.backward(&eval.trunk_tape, &d_features)?;
        Ok(PolicyGradients {
            trunk: trunk_grads,
            mean_head: mean_grads,
            std_head: std_grads,
        })
    }

    /// Draw one action. In stochastic mode the returned log-probability is
    /// that of the sampled action; in deterministic mode the action is
    /// `tanh(μ)` and the log-probability is the density at the mean.
    pub fn sample<R: Rng>(
        &self,
        obs: &Array1<f64>,
        deterministic: bool,
        rng: &mut R,
    ) -> Result<(Array1<f64>, f64)> {
        let batch = obs.clone().insert_axis(Axis(0));
        let noise = if deterministic {
            Array2::zeros((1, self.action_dim()))
        } else {
            Array2::from_shape_fn((1, self.action_dim()), |_| StandardNormal.sample(rng))
        };
        let eval = self.eval(&batch, noise)?;
        Ok((eval.action.row(0).to_owned(), eval.log_prob[0]))
    }
}

/// Deterministic policy `a = tanh(head(trunk(s)))`, the DDPG actor.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPolicy {
    pub trunk: Mlp,
    pub head: Mlp,
}

/// Adam accumulators for a deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicAdam {
    pub trunk: AdamState,
    pub head: AdamState,
}

impl DeterministicPolicy {
    pub fn new<R: Rng>(obs_dim: usize, action_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let trunk = Mlp::new(
            MlpSpec::new(vec![obs_dim, hidden], OutputActivation::Relu).expect("sizes"),
            rng,
        );
        let head = Mlp::new(
            MlpSpec::new(vec![hidden, hidden, action_dim], OutputActivation::Tanh).expect("sizes"),
            rng,
        );
        Self { trunk, head }
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.spec().input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.head.spec().output_dim()
    }

    pub fn adam(&self, learn_rate: f64) -> DeterministicAdam {
        DeterministicAdam {
            trunk: AdamState::new(&self.trunk, learn_rate),
            head: AdamState::new(&self.head, learn_rate),
        }
    }

    pub fn forward(&self, obs: &Array2<f64>) -> Result<(Array2<f64>, Tape, Tape)> {
        let (features, trunk_tape) = self.trunk.forward(obs)?;
        let (action, head_tape) = self.head.forward(&features)?;
        Ok((action, trunk_tape, head_tape))
    }

    /// Backpropagate a gradient w.r.t. the action into both networks.
    pub(crate) fn backward(
        &self,
        trunk_tape: &Tape,
        head_tape: &Tape,
        d_action: &Array2<f64>,
    ) -> Result<(Gradients, Gradients)> {
        let (head_grads, d_features) = self.head.backward(head_tape, d_action)?;
        let (trunk_grads, _) = self.trunk.backward(trunk_tape, &d_features)?;
        Ok((trunk_grads, head_grads))
    }
}
