//! Dense network substrate: batched forward pass, exact reverse-mode
//! gradients, Adam, and Polyak target averaging.
//!
//! Hidden layers are always affine + ReLU; the output layer activation is
//! chosen per network (linear Q-values/means, softplus std paths, tanh
//! deterministic actors). Everything is `f64` and deterministic.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Activation applied to the final layer's pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Relu,
    Softplus,
    Tanh,
}

impl OutputActivation {
    fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Relu => "relu",
            Self::Softplus => "softplus",
            Self::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Self::Linear),
            "relu" => Some(Self::Relu),
            "softplus" => Some(Self::Softplus),
            "tanh" => Some(Self::Tanh),
            _ => None,
        }
    }
}

/// Numerically guarded softplus `ln(1 + e^x)`; for `x > 30` the identity is
/// exact to well below 1e-13.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, the derivative of softplus.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn apply_activation(z: &Array2<f64>, act: OutputActivation) -> Array2<f64> {
    match act {
        OutputActivation::Linear => z.clone(),
        OutputActivation::Relu => z.mapv(|v| v.max(0.0)),
        OutputActivation::Softplus => z.mapv(softplus),
        OutputActivation::Tanh => z.mapv(f64::tanh),
    }
}

fn activation_derivative(z: &Array2<f64>, act: OutputActivation) -> Array2<f64> {
    match act {
        OutputActivation::Linear => Array2::ones(z.dim()),
        OutputActivation::Relu => z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        OutputActivation::Softplus => z.mapv(sigmoid),
        OutputActivation::Tanh => z.mapv(|v| {
            let t = v.tanh();
            1.0 - t * t
        }),
    }
}

/// Layer sizes plus the output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, output_activation: OutputActivation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig {
                field: "layer_sizes".into(),
                reason: "need at least an input and an output layer".into(),
            });
        }
        if layer_sizes.iter().any(|s| *s == 0) {
            return Err(Error::InvalidConfig {
                field: "layer_sizes".into(),
                reason: "sizes must be positive".into(),
            });
        }
        Ok(Self {
            layer_sizes,
            output_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// Parameters of one dense network: per-layer weight matrices (in × out)
/// and bias vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Cached pre-activations from a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    input: Array2<f64>,
    preacts: Vec<Array2<f64>>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }

    /// Smallest |pre-activation| across all layers; near-zero values mean a
    /// ReLU kink sits close to the evaluation point (finite differences are
    /// unreliable there).
    pub fn min_abs_preactivation(&self) -> f64 {
        self.preacts
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |acc, z| acc.min(z.abs()))
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
        self
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

impl Mlp {
    /// Fresh network with weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut weights = Vec::with_capacity(spec.n_layers());
        let mut biases = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let fan_in = spec.layer_sizes[l];
            let fan_out = spec.layer_sizes[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::from_shape_fn(fan_out, |_| {
                rng.random_range(-bound..bound)
            }));
        }
        Self {
            spec,
            weights,
            biases,
        }
    }

    /// Assemble a network from existing parameters, validating shapes.
    pub fn from_parts(
        spec: MlpSpec,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if weights.len() != spec.n_layers() || biases.len() != spec.n_layers() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::from_parts layer count",
                expected: spec.n_layers(),
                actual: weights.len(),
            });
        }
        for l in 0..spec.n_layers() {
            if weights[l].dim() != (spec.layer_sizes[l], spec.layer_sizes[l + 1]) {
                return Err(Error::ShapeMismatch {
                    context: "Mlp::from_parts weights",
                    expected: spec.layer_sizes[l] * spec.layer_sizes[l + 1],
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != spec.layer_sizes[l + 1] {
                return Err(Error::ShapeMismatch {
                    context: "Mlp::from_parts biases",
                    expected: spec.layer_sizes[l + 1],
                    actual: biases[l].len(),
                });
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>()
            + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    /// Batched forward pass over rows of `input` (batch × input_dim).
    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        if input.ncols() != self.spec.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::forward input",
                expected: self.spec.input_dim(),
                actual: input.ncols(),
            });
        }
        let n_layers = self.spec.n_layers();
        let mut preacts = Vec::with_capacity(n_layers);
        let mut h = input.clone();
        for l in 0..n_layers {
            let z = h.dot(&self.weights[l]) + &self.biases[l];
            h = if l + 1 == n_layers {
                apply_activation(&z, self.spec.output_activation)
            } else {
                apply_activation(&z, OutputActivation::Relu)
            };
            preacts.push(z);
        }
        Ok((
            h,
            Tape {
                input: input.clone(),
                preacts,
            },
        ))
    }

    /// Single-sample forward convenience.
    pub fn forward_one(&self, input: &Array1<f64>) -> Result<(Array1<f64>, Tape)> {
        let batch = input.clone().insert_axis(Axis(0));
        let (out, tape) = self.forward(&batch)?;
        Ok((out.remove_axis(Axis(0)), tape))
    }

    /// Exact reverse-mode gradients for the forward pass recorded in `tape`.
    ///
    /// `output_gradient` is `∂L/∂output` (batch × output_dim) of whatever
    /// scalar loss the caller is differentiating. Returns parameter
    /// gradients and `∂L/∂input`.
    pub fn backward(
        &self,
        tape: &Tape,
        output_gradient: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let n_layers = self.spec.n_layers();
        let last = &tape.preacts[n_layers - 1];
        if output_gradient.dim() != last.dim() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::backward output_gradient",
                expected: last.len(),
                actual: output_gradient.len(),
            });
        }
        if tape.input.ncols() != self.spec.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::backward tape",
                expected: self.spec.input_dim(),
                actual: tape.input.ncols(),
            });
        }

        let mut grads = Gradients {
            weights: Vec::with_capacity(n_layers),
            biases: Vec::with_capacity(n_layers),
        };
        // Built in reverse layer order, flipped at the end.
        let mut w_rev = Vec::with_capacity(n_layers);
        let mut b_rev = Vec::with_capacity(n_layers);

        let mut delta =
            output_gradient * &activation_derivative(last, self.spec.output_activation);
        for l in (0..n_layers).rev() {
            let h_prev = if l == 0 {
                tape.input.clone()
            } else {
                apply_activation(&tape.preacts[l - 1], OutputActivation::Relu)
            };
            w_rev.push(h_prev.t().dot(&delta));
            b_rev.push(delta.sum_axis(Axis(0)));
            let propagated = delta.dot(&self.weights[l].t());
            if l == 0 {
                w_rev.reverse();
                b_rev.reverse();
                grads.weights = w_rev;
                grads.biases = b_rev;
                return Ok((grads, propagated));
            }
            delta = propagated * &activation_derivative(&tape.preacts[l - 1], OutputActivation::Relu);
        }
        unreachable!("loop always returns at l == 0")
    }
}

/// Bias-corrected Adam accumulators for one [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    pub step: u64,
    pub learn_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &Mlp, learn_rate: f64) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
            learn_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn adam_update_array<D: ndarray::Dimension>(
    theta: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr_t: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    ndarray::Zip::from(theta)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|t, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *t -= lr_t * *m / (v.sqrt() + epsilon);
        });
}

/// One bias-corrected Adam step in place.
pub fn adam_step(params: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    // Fold the bias corrections into the step size.
    let lr_t = state.learn_rate * (1.0 - state.beta2.powi(t)).sqrt() / (1.0 - state.beta1.powi(t));
    for l in 0..params.weights.len() {
        adam_update_array(
            &mut params.weights[l],
            &grads.weights[l],
            &mut state.m.weights[l],
            &mut state.v.weights[l],
            lr_t,
            state.beta1,
            state.beta2,
            state.epsilon,
        );
        adam_update_array(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            lr_t,
            state.beta1,
            state.beta2,
            state.epsilon,
        );
    }
}

/// Exponential target smoothing `θ̄ ← (1-τ)·θ̄ + τ·θ`, computed as
/// `θ̄ += τ·(θ - θ̄)` so a converged target is bit-stable; `τ = 1` copies
/// the online parameters exactly.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    if tau == 1.0 {
        target.weights = online.weights.clone();
        target.biases = online.biases.clone();
        return;
    }
    for (tw, ow) in target.weights.iter_mut().zip(&online.weights) {
        ndarray::Zip::from(tw).and(ow).for_each(|t, &o| {
            *t += tau * (o - *t);
        });
    }
    for (tb, ob) in target.biases.iter_mut().zip(&online.biases) {
        ndarray::Zip::from(tb).and(ob).for_each(|t, &o| {
            *t += tau * (o - *t);
        });
    }
}

// ── Bit-exact text serialization ────────────────────────────────────────────

fn f64_to_hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn f64_from_hex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| Error::Checkpoint(format!("bad f64 hex `{s}`: {e}")))
}

fn write_values<'a, W: Write>(w: &mut W, tag: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {}", f64_to_hex(*v))?;
    }
    writeln!(w)?;
    Ok(())
}

fn read_tagged_values(line: &str, tag: &str, expected: usize) -> Result<Vec<f64>> {
    let mut parts = line.split_whitespace();
    let found = parts.next().unwrap_or("");
    if found != tag {
        return Err(Error::Checkpoint(format!(
            "expected section `{tag}`, found `{found}`"
        )));
    }
    let values: Vec<f64> = parts.map(f64_from_hex).collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Checkpoint(format!(
            "section `{tag}`: expected {expected} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn next_line(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<String> {
    match lines.next() {
        Some(Ok(line)) => Ok(line),
        Some(Err(e)) => Err(Error::Io(e)),
        None => Err(Error::Checkpoint("unexpected end of file".into())),
    }
}

/// Write one network as a named checkpoint section (shapes, then row-major
/// hex-encoded values; round-trips bit-exactly).
pub fn write_mlp<W: Write>(w: &mut W, name: &str, mlp: &Mlp) -> Result<()> {
    write!(w, "mlp {name} {}", mlp.spec.output_activation.name())?;
    for s in &mlp.spec.layer_sizes {
        write!(w, " {s}")?;
    }
    writeln!(w)?;
    for l in 0..mlp.spec.n_layers() {
        write_values(w, &format!("W{l}"), mlp.weights[l].iter())?;
        write_values(w, &format!("b{l}"), mlp.biases[l].iter())?;
    }
    Ok(())
}

/// Read a section written by [`write_mlp`]; `name` must match.
pub fn read_mlp(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    name: &str,
) -> Result<Mlp> {
    let header = next_line(lines)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("mlp") {
        return Err(Error::Checkpoint(format!("expected `mlp` header: {header}")));
    }
    let found = parts.next().unwrap_or("");
    if found != name {
        return Err(Error::Checkpoint(format!(
            "expected network `{name}`, found `{found}`"
        )));
    }
    let act = parts
        .next()
        .and_then(OutputActivation::from_name)
        .ok_or_else(|| Error::Checkpoint(format!("bad activation in: {header}")))?;
    let sizes: Vec<usize> = parts
        .map(|s| {
            s.parse::<usize>()
                .map_err(|e| Error::Checkpoint(format!("bad layer size `{s}`: {e}")))
        })
        .collect::<Result<_>>()?;
    let spec = MlpSpec::new(sizes, act)?;
    let mut weights = Vec::with_capacity(spec.n_layers());
    let mut biases = Vec::with_capacity(spec.n_layers());
    for l in 0..spec.n_layers() {
        let fan_in = spec.layer_sizes[l];
        let fan_out = spec.layer_sizes[l + 1];
        let wv = read_tagged_values(&next_line(lines)?, &format!("W{l}"), fan_in * fan_out)?;
        weights.push(
            Array2::from_shape_vec((fan_in, fan_out), wv)
                .map_err(|e| Error::Checkpoint(e.to_string()))?,
        );
        let bv = read_tagged_values(&next_line(lines)?, &format!("b{l}"), fan_out)?;
        biases.push(Array1::from(bv));
    }
    Ok(Mlp {
        spec,
        weights,
        biases,
    })
}

/// Write Adam accumulators alongside their network section.
pub fn write_adam<W: Write>(w: &mut W, name: &str, state: &AdamState) -> Result<()> {
    writeln!(
        w,
        "adam {name} {} {} {} {} {}",
        state.step,
        f64_to_hex(state.learn_rate),
        f64_to_hex(state.beta1),
        f64_to_hex(state.beta2),
        f64_to_hex(state.epsilon)
    )?;
    for l in 0..state.m.weights.len() {
        write_values(w, &format!("mW{l}"), state.m.weights[l].iter())?;
        write_values(w, &format!("mb{l}"), state.m.biases[l].iter())?;
        write_values(w, &format!("vW{l}"), state.v.weights[l].iter())?;
        write_values(w, &format!("vb{l}"), state.v.biases[l].iter())?;
    }
    Ok(())
}

/// Read a section written by [`write_adam`] for a network with `params` shapes.
pub fn read_adam(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    name: &str,
    params: &Mlp,
) -> Result<AdamState> {
    let header = next_line(lines)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("adam") {
        return Err(Error::Checkpoint(format!("expected `adam` header: {header}")));
    }
    let found = parts.next().unwrap_or("");
    if found != name {
        return Err(Error::Checkpoint(format!(
            "expected adam state `{name}`, found `{found}`"
        )));
    }
    let step: u64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad adam step in: {header}")))?;
    let mut scalar = || -> Result<f64> {
        parts
            .next()
            .ok_or_else(|| Error::Checkpoint("missing adam scalar".into()))
            .and_then(f64_from_hex)
    };
    let learn_rate = scalar()?;
    let beta1 = scalar()?;
    let beta2 = scalar()?;
    let epsilon = scalar()?;
    let mut state = AdamState::new(params, learn_rate);
    state.step = step;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.epsilon = epsilon;
    for l in 0..params.weights().len() {
        let dim = params.weights()[l].dim();
        let n = dim.0 * dim.1;
        let mw = read_tagged_values(&next_line(lines)?, &format!("mW{l}"), n)?;
        state.m.weights[l] =
            Array2::from_shape_vec(dim, mw).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mb = read_tagged_values(&next_line(lines)?, &format!("mb{l}"), dim.1)?;
        state.m.biases[l] = Array1::from(mb);
        let vw = read_tagged_values(&next_line(lines)?, &format!("vW{l}"), n)?;
        state.v.weights[l] =
            Array2::from_shape_vec(dim, vw).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let vb = read_tagged_values(&next_line(lines)?, &format!("vb{l}"), dim.1)?;
        state.v.biases[l] = Array1::from(vb);
    }
    Ok(state)
}

/// Line iterator for the readers above.
pub fn line_reader<R: BufRead>(reader: R) -> impl Iterator<Item = std::io::Result<String>> {
    reader.lines()
}
