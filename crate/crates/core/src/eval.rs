//! Evaluation episode runner: rolls a policy (trained agent or scripted
//! oracle) through seeded episodes and records the per-step force series the
//! metrics are computed from.
//!
//! Episode `i` resets the environment with `base_seed + i`; any stochastic
//! action noise derives from the same per-episode seed, so a report is a
//! pure function of `(policy, config, base_seed, episode count)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionIncrement, CanalEnv};
use crate::expert::{expert_action, ExpertPolicyParams};
use crate::metrics::{force_fft_band, ForceSeries, FFT_BAND_HI_HZ, FFT_BAND_LO_HZ};
use crate::reward::{compute_reward, RewardConfig, RewardInputs};
use crate::sac::{select_action, ActionMode, AgentNets};
use crate::{Error, Result};

/// What drives the instrument during evaluation.
#[derive(Clone, Copy)]
pub enum EvalPolicy<'a> {
    Agent {
        nets: &'a AgentNets,
        mode: ActionMode,
    },
    Oracle {
        params: &'a ExpertPolicyParams,
    },
}

impl EvalPolicy<'_> {
    pub fn mode_name(&self) -> &'static str {
        match self {
            EvalPolicy::Agent {
                mode: ActionMode::Deterministic,
                ..
            } => "deterministic",
            EvalPolicy::Agent {
                mode: ActionMode::Stochastic,
                ..
            } => "stochastic",
            EvalPolicy::Oracle { .. } => "oracle",
        }
    }
}

/// Everything recorded about one evaluation episode.
#[derive(Debug, Clone)]
pub struct EvalEpisode {
    pub episode_id: u64,
    pub reset_seed: u64,
    pub success: bool,
    pub steps: u64,
    pub elapsed_time: f64,
    pub cumulative_reward: f64,
    pub forces: ForceSeries,
    pub f_max: f64,
    pub f_integral: f64,
    /// Absent when the episode is too short to resolve the band floor.
    pub f_fft: Option<f64>,
    /// Absent for failed episodes.
    pub execution_time: Option<f64>,
}

/// Run `episode_count` evaluation episodes.
pub fn evaluate(
    env: &CanalEnv,
    policy: EvalPolicy<'_>,
    reward_cfg: &RewardConfig,
    episode_count: u64,
    base_seed: u64,
) -> Result<Vec<EvalEpisode>> {
    if episode_count == 0 {
        return Err(Error::InvalidInput(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut episodes = Vec::with_capacity(episode_count as usize);
    for episode_id in 0..episode_count {
        let reset_seed = base_seed.wrapping_add(episode_id);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(reset_seed ^ 0x5bd1_e995_9d1c_a3f7);
        let (mut state, mut obs) = env.reset(reset_seed);
        let mut force_samples: Vec<(f64, f64)> = Vec::new();
        let mut cumulative_reward = 0.0;
        while !state.done {
            let action = match policy {
                EvalPolicy::Agent { nets, mode } => {
                    let v = select_action(nets, &obs, mode, &mut noise_rng)?;
                    ActionIncrement::from_vector(v.as_slice().try_into().map_err(|_| {
                        Error::Shape("policy action must have 5 components".into())
                    })?)
                }
                EvalPolicy::Oracle { params } => {
                    expert_action(&state, env, params, &mut noise_rng)?
                }
            };
            let (next_state, next_obs, events) = env.step(&state, &action)?;
            cumulative_reward += compute_reward(
                &RewardInputs {
                    checkpoint_reached: events.checkpoint_reached,
                    force: events.applied_force_modulus,
                    dt: events.dt,
                    checkpoint_distance_mm: events.checkpoint_distance_mm,
                },
                reward_cfg,
            )?;
            force_samples.push((next_state.elapsed_time, events.applied_force_modulus));
            state = next_state;
            obs = next_obs;
        }
        let forces = ForceSeries::new(force_samples, 1.0 / env.config().dt)?;
        let f_max = crate::metrics::max_force(&forces)?;
        let f_integral = crate::metrics::integral_force(&forces)?;
        let f_fft = if forces.duration() >= 1.0 / FFT_BAND_LO_HZ {
            Some(force_fft_band(&forces, FFT_BAND_LO_HZ, FFT_BAND_HI_HZ)?)
        } else {
            None
        };
        episodes.push(EvalEpisode {
            episode_id,
            reset_seed,
            success: state.success,
            steps: state.step_count,
            elapsed_time: state.elapsed_time,
            cumulative_reward,
            forces,
            f_max,
            f_integral,
            f_fft,
            execution_time: state.success.then_some(state.elapsed_time),
        });
    }
    Ok(episodes)
}
