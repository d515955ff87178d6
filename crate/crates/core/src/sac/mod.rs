//! Soft actor-critic learner.
//!
//! Holds the value, soft-Q, and policy networks plus the Polyak-averaged
//! target value network, and drives them with the mixed expert/replay update
//! schedule: the first `pretrain_updates` rounds draw from the expert buffer
//! only, afterwards every fifth round (update_index mod 5 == 4 with the
//! default 1:4 interleave) uses expert data and the rest use replay.

mod buffer;
mod losses;
mod train;

pub use buffer::{ReplayBuffer, Transition};
pub use losses::{policy_loss, polyak_update, q_loss, value_loss};
pub use train::{train, EpisodeRecord, TrainConfig, TrainOutput};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{adam_step, gaussian_sample, mlp_forward, AdamState, MlpParams};
use crate::{Error, Result};

/// Hyperparameters of the learner and its update schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SacHyperparams {
    /// Discount factor.
    pub gamma: f64,
    /// Entropy temperature (fixed, no automatic tuning).
    pub alpha: f64,
    /// Polyak rate for the target value network.
    pub tau: f64,
    pub batch_size: usize,
    /// Environment steps between update rounds.
    pub update_every: u64,
    /// Replay updates per expert update after pretraining.
    pub expert_interleave: u64,
    /// Expert-only update rounds before the simulation phase.
    pub pretrain_updates: u64,
}

impl Default for SacHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            tau: 0.005,
            batch_size: 256,
            update_every: 5,
            expert_interleave: 4,
            pretrain_updates: 1000,
        }
    }
}

impl SacHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.batch_size == 0 || self.update_every == 0 {
            return Err(Error::InvalidInput(
                "batch_size and update_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which buffer an update round draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferTag {
    Expert,
    Replay,
}

impl std::fmt::Display for BufferTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BufferTag::Expert => write!(f, "expert"),
            BufferTag::Replay => write!(f, "replay"),
        }
    }
}

/// Buffer choice as a pure function of the update index.
pub fn buffer_tag(update_index: u64, hp: &SacHyperparams) -> BufferTag {
    if update_index < hp.pretrain_updates {
        return BufferTag::Expert;
    }
    let cycle = hp.expert_interleave + 1;
    if update_index % cycle == hp.expert_interleave {
        BufferTag::Expert
    } else {
        BufferTag::Replay
    }
}

/// The four networks and their optimizer states.
///
/// `value` and `value_target` share an architecture; the Q network takes the
/// concatenated observation and action; the policy outputs a mean and a log
/// standard deviation per action dimension.
#[derive(Debug, Clone)]
pub struct AgentNets {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub value: MlpParams,
    pub value_target: MlpParams,
    pub q: MlpParams,
    pub policy: MlpParams,
    pub value_opt: AdamState,
    pub q_opt: AdamState,
    pub policy_opt: AdamState,
}

impl AgentNets {
    /// Randomly initialized networks with the given hidden layout; the target
    /// value network starts as an exact copy of the value network.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = |input: usize, output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(output);
            v
        };
        let value = MlpParams::init(&sizes(obs_dim, 1), rng)?;
        let q = MlpParams::init(&sizes(obs_dim + action_dim, 1), rng)?;
        let policy = MlpParams::init(&sizes(obs_dim, 2 * action_dim), rng)?;
        let value_opt = AdamState::new(&value);
        let q_opt = AdamState::new(&q);
        let policy_opt = AdamState::new(&policy);
        Ok(Self {
            obs_dim,
            action_dim,
            value_target: value.clone(),
            value,
            q,
            policy,
            value_opt,
            q_opt,
            policy_opt,
        })
    }

    /// The published topology: 12-dim state, 5-dim action, two hidden layers
    /// of 128 units per network.
    pub fn standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(
            crate::env::OBS_DIM,
            crate::env::ACTION_DIM,
            &[128, 128],
            rng,
        )
        .expect("standard architecture is valid")
    }

    /// [`standard`](Self::standard) initialized from a bare seed.
    pub fn standard_seeded(seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::standard(&mut rng)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Shape(format!("agent network {name} has wrong dims")))
            }
        };
        check("value", self.value.input_dim() == self.obs_dim && self.value.output_dim() == 1)?;
        check("value_target", self.value_target.same_shape(&self.value))?;
        check(
            "q",
            self.q.input_dim() == self.obs_dim + self.action_dim && self.q.output_dim() == 1,
        )?;
        check(
            "policy",
            self.policy.input_dim() == self.obs_dim
                && self.policy.output_dim() == 2 * self.action_dim,
        )?;
        for (name, net) in [
            ("value", &self.value),
            ("value_target", &self.value_target),
            ("q", &self.q),
            ("policy", &self.policy),
        ] {
            if !net.is_finite() {
                return Err(Error::NonFinite(format!("{name} network parameters")));
            }
        }
        Ok(())
    }
}

/// How `select_action` turns the policy head into an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Reparameterized sample; used during training.
    Stochastic,
    /// `tanh(mean)`; used for evaluation.
    Deterministic,
}

/// Standard-normal noise vector drawn from the caller's generator.
pub fn standard_normal_noise<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Action for one observation under the current policy.
pub fn select_action<R: Rng + ?Sized>(
    nets: &AgentNets,
    obs: &[f64],
    mode: ActionMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let out = mlp_forward(&nets.policy, obs)?;
    let (mean, log_std) = out.split_at(nets.action_dim);
    Ok(match mode {
        ActionMode::Deterministic => mean.iter().map(|m| m.tanh()).collect(),
        ActionMode::Stochastic => {
            let noise = standard_normal_noise(rng, nets.action_dim);
            gaussian_sample(mean, log_std, &noise).action
        }
    })
}

/// Losses observed during one executed update round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDiagnostics {
    pub buffer: BufferTag,
    pub value_loss: f64,
    pub q_loss: f64,
    pub policy_loss: f64,
}

/// Result of attempting one update round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundOutcome {
    Updated(RoundDiagnostics),
    /// The scheduled buffer has fewer transitions than one batch.
    Skipped {
        buffer: BufferTag,
        available: usize,
        required: usize,
    },
}

/// One update round: a value step, a Q step, a policy step (in that order),
/// then a Polyak update of the target value network.
///
/// The buffer is chosen by [`buffer_tag`]; if it cannot fill a batch the
/// round is skipped with an explicit signal and the networks stay untouched.
pub fn update_round<R: Rng + ?Sized>(
    nets: &mut AgentNets,
    replay: &ReplayBuffer,
    expert: &ReplayBuffer,
    hp: &SacHyperparams,
    update_index: u64,
    rng: &mut R,
) -> Result<RoundOutcome> {
    let tag = buffer_tag(update_index, hp);
    let source = match tag {
        BufferTag::Expert => expert,
        BufferTag::Replay => replay,
    };
    if source.len() < hp.batch_size {
        return Ok(RoundOutcome::Skipped {
            buffer: tag,
            available: source.len(),
            required: hp.batch_size,
        });
    }
    let batch = source.sample(rng, hp.batch_size);

    let value_noise: Vec<Vec<f64>> = (0..batch.len())
        .map(|_| standard_normal_noise(rng, nets.action_dim))
        .collect();
    let (vl, v_grads) = value_loss(nets, &batch, hp, &value_noise)?;
    let (new_value, new_value_opt) = adam_step(&nets.value, &v_grads, &nets.value_opt)?;
    nets.value = new_value;
    nets.value_opt = new_value_opt;

    let (ql, q_grads) = q_loss(nets, &batch, hp)?;
    let (new_q, new_q_opt) = adam_step(&nets.q, &q_grads, &nets.q_opt)?;
    nets.q = new_q;
    nets.q_opt = new_q_opt;

    let policy_noise: Vec<Vec<f64>> = (0..batch.len())
        .map(|_| standard_normal_noise(rng, nets.action_dim))
        .collect();
    let (pl, p_grads) = policy_loss(nets, &batch, hp, &policy_noise)?;
    let (new_policy, new_policy_opt) = adam_step(&nets.policy, &p_grads, &nets.policy_opt)?;
    nets.policy = new_policy;
    nets.policy_opt = new_policy_opt;

    nets.value_target = polyak_update(&nets.value_target, &nets.value, hp.tau)?;

    if !(vl.is_finite() && ql.is_finite() && pl.is_finite()) {
        return Err(Error::NonFinite(format!(
            "losses at update {update_index} ({tag} buffer): value {vl}, q {ql}, policy {pl}"
        )));
    }
    Ok(RoundOutcome::Updated(RoundDiagnostics {
        buffer: tag,
        value_loss: vl,
        q_loss: ql,
        policy_loss: pl,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_is_all_expert_through_pretraining() {
        let hp = SacHyperparams::default();
        for i in 0..1000 {
            assert_eq!(buffer_tag(i, &hp), BufferTag::Expert, "index {i}");
        }
    }

    #[test]
    fn schedule_interleaves_one_to_four_after_pretraining() {
        let hp = SacHyperparams::default();
        let tags: Vec<BufferTag> = (1000..1005).map(|i| buffer_tag(i, &hp)).collect();
        assert_eq!(
            tags,
            vec![
                BufferTag::Replay,
                BufferTag::Replay,
                BufferTag::Replay,
                BufferTag::Replay,
                BufferTag::Expert
            ]
        );
    }

    #[test]
    fn schedule_counts_are_exact_over_five_thousand_updates() {
        let hp = SacHyperparams::default();
        let expert = (1000..6000)
            .filter(|&i| buffer_tag(i, &hp) == BufferTag::Expert)
            .count();
        assert_eq!(expert, 1000);
        assert_eq!(5000 - expert, 4000);
    }

    #[test]
    fn deterministic_action_of_zero_policy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut nets = AgentNets::new(3, 2, &[4], &mut rng).unwrap();
        nets.policy = crate::nn::MlpParams::zeros(nets.policy.layer_sizes()).unwrap();
        let a = select_action(&nets, &[0.4, -0.2, 0.9], ActionMode::Deterministic, &mut rng)
            .unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_action_is_repeatable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nets = AgentNets::new(3, 2, &[8], &mut rng).unwrap();
        let obs = [0.1, 0.2, -0.3];
        let a = select_action(&nets, &obs, ActionMode::Deterministic, &mut rng).unwrap();
        let b = select_action(&nets, &obs, ActionMode::Deterministic, &mut rng).unwrap();
        assert_eq!(a, b);
        for v in &a {
            assert!(v.abs() <= 1.0);
        }
    }

    #[test]
    fn stochastic_mean_approaches_squashed_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nets = AgentNets::new(2, 1, &[4], &mut rng).unwrap();
        let obs = [0.3, -0.6];
        // Deterministic oracle: E[tanh(mu + sigma*eps)] by fine quadrature
        // over the standard normal density.
        let out = crate::nn::mlp_forward(&nets.policy, &obs).unwrap();
        let (mu, sigma) = (out[0], out[1].clamp(-20.0, 2.0).exp());
        let mut expected = 0.0;
        let steps = 400_000;
        let lo = -8.0;
        let hi = 8.0;
        let h = (hi - lo) / steps as f64;
        for i in 0..=steps {
            let e = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let phi = (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt();
            expected += w * (mu + sigma * e).tanh() * phi * h;
        }

        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a = select_action(&nets, &obs, ActionMode::Stochastic, &mut rng).unwrap()[0];
            sum += a;
            sum_sq += a * a;
        }
        let mean = sum / n as f64;
        let sd = (sum_sq / n as f64 - mean * mean).sqrt();
        let tol = 3.0 * sd / (n as f64).sqrt();
        assert!(
            (mean - expected).abs() <= tol,
            "mean {mean}, expected {expected}, tol {tol}"
        );
    }

    #[test]
    fn update_round_skips_when_buffer_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = AgentNets::new(3, 2, &[4], &mut rng).unwrap();
        let before = nets.value.clone();
        let replay = ReplayBuffer::new(10);
        let expert = ReplayBuffer::new(10);
        let hp = SacHyperparams::default();
        // Index past pretraining so the replay buffer is scheduled.
        let outcome = update_round(&mut nets, &replay, &expert, &hp, 1000, &mut rng).unwrap();
        assert_eq!(
            outcome,
            RoundOutcome::Skipped {
                buffer: BufferTag::Replay,
                available: 0,
                required: 256
            }
        );
        assert_eq!(nets.value, before);
    }

    #[test]
    fn update_round_moves_parameters_and_counters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut nets = AgentNets::new(3, 2, &[6], &mut rng).unwrap();
        let mut expert = ReplayBuffer::new(64);
        for _ in 0..32 {
            expert.push(Transition {
                obs: standard_normal_noise(&mut rng, 3),
                action: vec![0.1, -0.2],
                reward: 1.0,
                next_obs: standard_normal_noise(&mut rng, 3),
                done: false,
            });
        }
        let hp = SacHyperparams {
            batch_size: 16,
            ..SacHyperparams::default()
        };
        let replay = ReplayBuffer::new(16);
        let before_value = nets.value.clone();
        let before_target = nets.value_target.clone();
        let outcome = update_round(&mut nets, &replay, &expert, &hp, 0, &mut rng).unwrap();
        match outcome {
            RoundOutcome::Updated(d) => {
                assert_eq!(d.buffer, BufferTag::Expert);
                assert!(d.value_loss.is_finite());
            }
            RoundOutcome::Skipped { .. } => panic!("expected an executed round"),
        }
        assert_ne!(nets.value, before_value);
        assert_ne!(nets.value_target, before_target);
        assert_eq!(nets.value_opt.step_count, 1);
        assert_eq!(nets.q_opt.step_count, 1);
        assert_eq!(nets.policy_opt.step_count, 1);
        nets.validate().unwrap();
    }

    #[test]
    fn agent_nets_validate_flags_dimension_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut nets = AgentNets::new(3, 2, &[4], &mut rng).unwrap();
        nets.validate().unwrap();
        nets.q = crate::nn::MlpParams::zeros(&[3, 4, 1]).unwrap();
        assert!(nets.validate().is_err());
    }
}
