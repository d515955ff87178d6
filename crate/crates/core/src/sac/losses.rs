//! Soft actor-critic losses and their analytic gradients.
//!
//! Three losses drive one update round:
//!
//! - value: `mean 1/2 (V(s) - [Q(s, a~) - alpha * log pi(a~|s)])^2` with a
//!   freshly sampled `a~`; the bracketed target is a constant for the value
//!   gradient.
//! - soft Q: `mean 1/2 (Q(s, a) - [r + (1 - done) * gamma * V_target(s')])^2`
//!   with the bootstrap target constant for the Q gradient.
//! - policy: `mean [alpha * log pi(a~|s) - Q(s, a~)]` with gradients flowing
//!   through the reparameterized sample `a~ = tanh(mu + sigma * eps)` in both
//!   terms; the Q network is frozen.
//!
//! Each function takes the per-sample standard-normal draws it needs from the
//! caller, so results are pure functions of their arguments.

use crate::nn::{
    gaussian_sample, mlp_backward_accumulate, mlp_forward_trace, mlp_input_gradient, MlpParams,
    LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS,
};
use crate::{Error, Result};

use super::{AgentNets, SacHyperparams, Transition};

fn check_batch(batch: &[&Transition], noise: Option<&[Vec<f64>]>, action_dim: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if let Some(noise) = noise {
        if noise.len() != batch.len() {
            return Err(Error::Shape(format!(
                "noise count {} does not match batch size {}",
                noise.len(),
                batch.len()
            )));
        }
        if noise.iter().any(|n| n.len() != action_dim) {
            return Err(Error::Shape(format!(
                "noise vectors must have {action_dim} components"
            )));
        }
    }
    Ok(())
}

/// Split a policy-network output into (mean, raw log-std) halves.
fn split_policy_output(out: &[f64], action_dim: usize) -> (&[f64], &[f64]) {
    (&out[..action_dim], &out[action_dim..2 * action_dim])
}

/// Value loss and its gradient with respect to the value network.
pub fn value_loss(
    nets: &AgentNets,
    batch: &[&Transition],
    hp: &SacHyperparams,
    noise: &[Vec<f64>],
) -> Result<(f64, MlpParams)> {
    check_batch(batch, Some(noise), nets.action_dim)?;
    let n = batch.len() as f64;
    let mut grads = MlpParams::zeros(nets.value.layer_sizes())?;
    let mut loss = 0.0;
    let mut q_input = vec![0.0; nets.obs_dim + nets.action_dim];
    for (t, eps) in batch.iter().zip(noise.iter()) {
        let policy_out = crate::nn::mlp_forward(&nets.policy, &t.obs)?;
        let (mean, log_std) = split_policy_output(&policy_out, nets.action_dim);
        let head = gaussian_sample(mean, log_std, eps);

        q_input[..nets.obs_dim].copy_from_slice(&t.obs);
        q_input[nets.obs_dim..].copy_from_slice(&head.action);
        let q_val = crate::nn::mlp_forward(&nets.q, &q_input)?[0];
        let target = q_val - hp.alpha * head.log_prob;

        let trace = mlp_forward_trace(&nets.value, &t.obs)?;
        let v = trace.output()[0];
        let residual = v - target;
        loss += 0.5 * residual * residual;
        mlp_backward_accumulate(&nets.value, &t.obs, &trace, &[residual / n], &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// Soft Bellman residual loss and its gradient with respect to the Q network.
pub fn q_loss(
    nets: &AgentNets,
    batch: &[&Transition],
    hp: &SacHyperparams,
) -> Result<(f64, MlpParams)> {
    check_batch(batch, None, nets.action_dim)?;
    let n = batch.len() as f64;
    let mut grads = MlpParams::zeros(nets.q.layer_sizes())?;
    let mut loss = 0.0;
    let mut q_input = vec![0.0; nets.obs_dim + nets.action_dim];
    for t in batch {
        let bootstrap = if t.done {
            0.0
        } else {
            hp.gamma * crate::nn::mlp_forward(&nets.value_target, &t.next_obs)?[0]
        };
        let target = t.reward + bootstrap;

        q_input[..nets.obs_dim].copy_from_slice(&t.obs);
        q_input[nets.obs_dim..].copy_from_slice(&t.action);
        let trace = mlp_forward_trace(&nets.q, &q_input)?;
        let q_val = trace.output()[0];
        let residual = q_val - target;
        loss += 0.5 * residual * residual;
        mlp_backward_accumulate(&nets.q, &q_input, &trace, &[residual / n], &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// Policy loss and its gradient with respect to the policy network.
pub fn policy_loss(
    nets: &AgentNets,
    batch: &[&Transition],
    hp: &SacHyperparams,
    noise: &[Vec<f64>],
) -> Result<(f64, MlpParams)> {
    check_batch(batch, Some(noise), nets.action_dim)?;
    let n = batch.len() as f64;
    let act = nets.action_dim;
    let mut grads = MlpParams::zeros(nets.policy.layer_sizes())?;
    let mut loss = 0.0;
    let mut q_input = vec![0.0; nets.obs_dim + act];
    let mut head_grad = vec![0.0; 2 * act];
    for (t, eps) in batch.iter().zip(noise.iter()) {
        let policy_trace = mlp_forward_trace(&nets.policy, &t.obs)?;
        let (mean, raw_log_std) = split_policy_output(policy_trace.output(), act);
        let head = gaussian_sample(mean, raw_log_std, eps);

        q_input[..nets.obs_dim].copy_from_slice(&t.obs);
        q_input[nets.obs_dim..].copy_from_slice(&head.action);
        let q_trace = mlp_forward_trace(&nets.q, &q_input)?;
        let q_val = q_trace.output()[0];
        loss += hp.alpha * head.log_prob - q_val;

        // dQ/d(input) restricted to the action slots; theta stays frozen.
        let dq_dinput = mlp_input_gradient(&nets.q, &q_trace, &[1.0])?;
        let dq_da = &dq_dinput[nets.obs_dim..];

        for i in 0..act {
            let a = head.action[i];
            let sigma = head.log_std[i].exp();
            let one_minus_a2 = 1.0 - a * a;
            // d(per-sample loss)/d a_i: tanh correction of log pi plus -Q path.
            let dloss_da = hp.alpha * 2.0 * a / (one_minus_a2 + SQUASH_EPS) - dq_da[i];
            let dloss_du = dloss_da * one_minus_a2;
            head_grad[i] = dloss_du / n;
            // Through log_std: -alpha from -ln(sigma), plus u = mu + sigma*eps;
            // zero when the raw output sits outside the clamp window.
            let clamped = raw_log_std[i] <= LOG_STD_MIN || raw_log_std[i] >= LOG_STD_MAX;
            head_grad[act + i] = if clamped {
                0.0
            } else {
                (dloss_du * sigma * eps[i] - hp.alpha) / n
            };
        }
        mlp_backward_accumulate(&nets.policy, &t.obs, &policy_trace, &head_grad, &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// Exponential blend of target network parameters toward the online network:
/// every element becomes `tau * online + (1 - tau) * target`.
pub fn polyak_update(target: &MlpParams, online: &MlpParams, tau: f64) -> Result<MlpParams> {
    if !target.same_shape(online) {
        return Err(Error::Shape(format!(
            "polyak shapes differ: {:?} vs {:?}",
            target.layer_sizes(),
            online.layer_sizes()
        )));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "tau must lie in (0, 1], got {tau}"
        )));
    }
    let blended: Vec<f64> = target
        .flatten()
        .iter()
        .zip(online.flatten().iter())
        .map(|(t, o)| tau * o + (1.0 - tau) * t)
        .collect();
    MlpParams::from_flat(target.layer_sizes(), &blended)
}
