//! Minimal dense-network engine.
//!
//! Forward pass, analytic backpropagation, Adam, and the squashed-Gaussian
//! policy head. Hidden layers are rectified-linear, the output layer is
//! linear. Everything here is a pure function of its inputs: identical
//! arguments produce bitwise-identical results, which is what makes whole
//! training runs reproducible.

use rand::Rng;

use crate::{Error, Result};

/// Lower clamp for policy log standard deviations.
pub const LOG_STD_MIN: f64 = -20.0;
/// Upper clamp for policy log standard deviations.
pub const LOG_STD_MAX: f64 = 2.0;
/// Floor inside the tanh log-density correction, keeps log-probs finite at
/// saturation.
pub const SQUASH_EPS: f64 = 1e-6;

/// Weights and biases of a dense network.
///
/// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l+1]` outputs;
/// weights are stored flat in row-major `(out, in)` order. The same type
/// doubles as the container for gradients, which always share the shape of
/// the parameters they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// All-zero network of the given architecture.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Shape(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Shape("layer sizes must be positive".into()));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for l in 0..layer_sizes.len() - 1 {
            weights.push(vec![0.0; layer_sizes[l] * layer_sizes[l + 1]]);
            biases.push(vec![0.0; layer_sizes[l + 1]]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Random initialization: weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        for l in 0..params.num_layers() {
            let limit = 1.0 / (layer_sizes[l] as f64).sqrt();
            for w in params.weights[l].iter_mut() {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Parameters in canonical order: per layer, weights row-major then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.num_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        if flat.len() != params.param_count() {
            return Err(Error::Shape(format!(
                "flat parameter array has {} values, architecture needs {}",
                flat.len(),
                params.param_count()
            )));
        }
        let mut off = 0;
        for l in 0..params.num_layers() {
            let nw = params.weights[l].len();
            params.weights[l].copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = params.biases[l].len();
            params.biases[l].copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(params)
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.layer_sizes, other.layer_sizes
            )));
        }
        Ok(())
    }
}

/// Forward pass: hidden layers rectified-linear, output layer linear.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    let trace = mlp_forward_trace(params, input)?;
    Ok(trace.into_output())
}

/// Per-layer post-activation values from a forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().unwrap()
    }
}

/// Dot product with four independent accumulators. The fixed summation tree
/// keeps results bitwise deterministic while breaking the serial dependency
/// chain that would otherwise bound throughput by add latency.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += c * x` over slices.
#[inline]
fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += c * xi;
    }
}

/// Forward pass that keeps every layer's post-activation output.
pub fn mlp_forward_trace(params: &MlpParams, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input length {} does not match first layer size {}",
            input.len(),
            params.input_dim()
        )));
    }
    let mut activations = Vec::with_capacity(params.num_layers());
    let mut x: &[f64] = input;
    for l in 0..params.num_layers() {
        let in_dim = params.layer_sizes[l];
        let out_dim = params.layer_sizes[l + 1];
        let w = &params.weights[l];
        let b = &params.biases[l];
        let last = l == params.num_layers() - 1;
        let mut y = vec![0.0; out_dim];
        for o in 0..out_dim {
            let acc = b[o] + dot(&w[o * in_dim..(o + 1) * in_dim], x);
            y[o] = if last { acc } else { acc.max(0.0) };
        }
        activations.push(y);
        x = activations.last().unwrap();
    }
    Ok(ForwardTrace { activations })
}

/// Backpropagation of `grad_output` (the cotangent of the network output)
/// through `params`, recomputing the forward pass internally.
///
/// Returns the gradient of the scalar `L = grad_output . output` with respect
/// to every parameter (same shape as `params`) and to the input.
pub fn mlp_backward(
    params: &MlpParams,
    input: &[f64],
    grad_output: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    let trace = mlp_forward_trace(params, input)?;
    mlp_backward_from_trace(params, input, &trace, grad_output)
}

/// Backpropagation reusing an existing forward trace.
pub fn mlp_backward_from_trace(
    params: &MlpParams,
    input: &[f64],
    trace: &ForwardTrace,
    grad_output: &[f64],
) -> Result<(MlpParams, Vec<f64>)> {
    let mut grads = MlpParams::zeros(&params.layer_sizes)?;
    let dx = backward_impl(params, input, trace, grad_output, Some(&mut grads), false)?;
    Ok((grads, dx))
}

/// Backpropagation that adds parameter gradients into `acc` instead of
/// allocating fresh storage; used when summing gradients over a batch.
pub fn mlp_backward_accumulate(
    params: &MlpParams,
    input: &[f64],
    trace: &ForwardTrace,
    grad_output: &[f64],
    acc: &mut MlpParams,
) -> Result<Vec<f64>> {
    params.check_same_shape(acc, "gradient accumulator")?;
    backward_impl(params, input, trace, grad_output, Some(acc), true)
}

/// Gradient of `grad_output . output` with respect to the network input only.
pub fn mlp_input_gradient(
    params: &MlpParams,
    trace: &ForwardTrace,
    grad_output: &[f64],
) -> Result<Vec<f64>> {
    // Parameter gradients skipped; the input slot is never read.
    backward_impl(params, &[], trace, grad_output, None, false)
}

fn backward_impl(
    params: &MlpParams,
    input: &[f64],
    trace: &ForwardTrace,
    grad_output: &[f64],
    mut param_grads: Option<&mut MlpParams>,
    accumulate: bool,
) -> Result<Vec<f64>> {
    if grad_output.len() != params.output_dim() {
        return Err(Error::Shape(format!(
            "grad_output length {} does not match output size {}",
            grad_output.len(),
            params.output_dim()
        )));
    }
    // dz holds dL/d(pre-activation) of the layer being processed.
    let mut dz = grad_output.to_vec();
    for l in (0..params.num_layers()).rev() {
        let in_dim = params.layer_sizes[l];
        let out_dim = params.layer_sizes[l + 1];
        let x: &[f64] = if l == 0 { input } else { &trace.activations[l - 1] };
        let w = &params.weights[l];
        let mut dx = vec![0.0; in_dim];
        match param_grads.as_deref_mut() {
            Some(grads) => {
                let gw = &mut grads.weights[l];
                for o in 0..out_dim {
                    let d = dz[o];
                    if accumulate {
                        grads.biases[l][o] += d;
                    } else {
                        grads.biases[l][o] = d;
                    }
                    let row = o * in_dim;
                    let gw_row = &mut gw[row..row + in_dim];
                    if accumulate {
                        axpy(gw_row, d, x);
                    } else {
                        for (g, xi) in gw_row.iter_mut().zip(x.iter()) {
                            *g = d * xi;
                        }
                    }
                    axpy(&mut dx, d, &w[row..row + in_dim]);
                }
            }
            None => {
                for o in 0..out_dim {
                    let d = dz[o];
                    let row = o * in_dim;
                    axpy(&mut dx, d, &w[row..row + in_dim]);
                }
            }
        }
        if l > 0 {
            // Rectifier derivative from the post-activation value.
            for (dxi, &xi) in dx.iter_mut().zip(trace.activations[l - 1].iter()) {
                if xi <= 0.0 {
                    *dxi = 0.0;
                }
            }
        }
        dz = dx;
    }
    Ok(dz)
}

/// Accumulate `other` into `self`-shaped gradient storage: `acc += other`.
pub fn accumulate_grads(acc: &mut MlpParams, other: &MlpParams) -> Result<()> {
    acc.check_same_shape(other, "gradient accumulation")?;
    for l in 0..acc.num_layers() {
        for (a, b) in acc.weights[l].iter_mut().zip(other.weights[l].iter()) {
            *a += b;
        }
        for (a, b) in acc.biases[l].iter_mut().zip(other.biases[l].iter()) {
            *a += b;
        }
    }
    Ok(())
}

/// Scale every gradient component by `c`.
pub fn scale_grads(grads: &mut MlpParams, c: f64) {
    for l in 0..grads.num_layers() {
        for g in grads.weights[l].iter_mut() {
            *g *= c;
        }
        for g in grads.biases[l].iter_mut() {
            *g *= c;
        }
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the defaults used by every network in this artifact.
    pub fn new(shape_of: &MlpParams) -> Self {
        Self::with_learning_rate(shape_of, 3e-4)
    }

    pub fn with_learning_rate(shape_of: &MlpParams, learning_rate: f64) -> Self {
        Self {
            first_moment: MlpParams::zeros(shape_of.layer_sizes()).unwrap(),
            second_moment: MlpParams::zeros(shape_of.layer_sizes()).unwrap(),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Pure: returns the new parameters and the
/// advanced optimizer state.
pub fn adam_step(
    params: &MlpParams,
    grads: &MlpParams,
    state: &AdamState,
) -> Result<(MlpParams, AdamState)> {
    params.check_same_shape(grads, "adam parameters vs gradients")?;
    params.check_same_shape(&state.first_moment, "adam parameters vs moments")?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient passed to adam_step".into()));
    }
    let mut new_params = params.clone();
    let mut new_state = state.clone();
    new_state.step_count = state.step_count + 1;
    let t = new_state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    for l in 0..params.num_layers() {
        adam_slice(
            &mut new_params.weights[l],
            &grads.weights[l],
            &mut new_state.first_moment.weights[l],
            &mut new_state.second_moment.weights[l],
            state,
            bias1,
            bias2,
        );
        adam_slice(
            &mut new_params.biases[l],
            &grads.biases[l],
            &mut new_state.first_moment.biases[l],
            &mut new_state.second_moment.biases[l],
            state,
            bias1,
            bias2,
        );
    }
    Ok((new_params, new_state))
}

#[allow(clippy::too_many_arguments)]
fn adam_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    state: &AdamState,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..p.len() {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        p[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

/// Output of the squashed-Gaussian policy head for one state.
#[derive(Debug, Clone)]
pub struct GaussianHeadOutput {
    pub mean: Vec<f64>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
    /// `tanh(mean + sigma * noise)`, componentwise in `[-1, 1]`.
    pub action: Vec<f64>,
    /// Joint log-density of `action` under the squashed Gaussian.
    pub log_prob: f64,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Reparameterized sample from the diagonal Gaussian head.
///
/// `noise` carries standard-normal draws supplied by the caller, so the
/// action is a deterministic, differentiable function of `(mean, log_std,
/// noise)`. The pre-squash sample `u = mean + sigma * noise` goes through
/// `tanh`, and the log-density picks up the change-of-variables correction
/// `-ln(1 - tanh(u)^2 + SQUASH_EPS)` per dimension.
pub fn gaussian_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> GaussianHeadOutput {
    assert_eq!(mean.len(), log_std.len(), "mean/log_std length mismatch");
    assert_eq!(mean.len(), noise.len(), "mean/noise length mismatch");
    let dim = mean.len();
    let mut clamped = Vec::with_capacity(dim);
    let mut action = Vec::with_capacity(dim);
    let mut log_prob = 0.0;
    for i in 0..dim {
        let ls = log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let sigma = ls.exp();
        let u = sigma.mul_add(noise[i], mean[i]);
        let a = u.tanh();
        // logN(u; mean, sigma) with u = mean + sigma*eps reduces to
        // -ln(sqrt(2pi)) - ln(sigma) - eps^2/2.
        log_prob += -LN_SQRT_2PI - ls - 0.5 * noise[i] * noise[i];
        log_prob -= (1.0 - a * a + SQUASH_EPS).ln();
        clamped.push(ls);
        action.push(a);
    }
    GaussianHeadOutput {
        mean: mean.to_vec(),
        log_std: clamped,
        action,
        log_prob,
    }
}
