//! The full training loop: expert-only pretraining followed by simulation
//! episodes with an update round every few environment steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionIncrement, CanalEnv};
use crate::reward::{compute_reward, RewardConfig, RewardInputs};
use crate::{Error, Result};

use super::{
    select_action, update_round, ActionMode, AgentNets, ReplayBuffer, RoundOutcome,
    SacHyperparams, Transition,
};

/// Everything a training run needs besides the environment and networks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: u64,
    pub seed: u64,
    pub buffer_capacity: usize,
    pub reward: RewardConfig,
    pub hp: SacHyperparams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            seed: 0,
            buffer_capacity: 1_000_000,
            reward: RewardConfig::default(),
            hp: SacHyperparams::default(),
        }
    }
}

/// One line of the per-episode reward log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub cumulative_reward: f64,
    pub success: bool,
    pub steps: u64,
}

/// Result of a completed training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub episode_log: Vec<EpisodeRecord>,
    /// Update rounds actually executed, pretraining included.
    pub total_updates: u64,
    /// Rounds skipped because the scheduled buffer could not fill a batch.
    pub skipped_rounds: u64,
}

/// Run the two-phase learning process.
///
/// Phase one performs `hp.pretrain_updates` expert-only rounds. Phase two
/// rolls out `episodes` episodes with stochastic actions, pushing every
/// transition to the replay buffer and attempting one update round every
/// `hp.update_every` steps; skipped rounds (buffer not yet full enough) do
/// not consume an update index. The whole trajectory is a deterministic
/// function of `(seed, config, nets, expert buffer)`.
///
/// On a non-finite loss the run aborts with an error carrying the update
/// index; `nets` keeps the partially trained parameters for inspection.
pub fn train(
    env: &CanalEnv,
    nets: &mut AgentNets,
    expert: &ReplayBuffer,
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<TrainOutput> {
    cfg.hp.validate()?;
    cfg.reward.validate()?;
    nets.validate()?;
    if expert.len() < cfg.hp.batch_size {
        return Err(Error::InvalidInput(format!(
            "expert buffer holds {} transitions, pretraining needs at least {}",
            expert.len(),
            cfg.hp.batch_size
        )));
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut env_seed_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut action_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let mut update_rng = ChaCha8Rng::seed_from_u64(master.gen());

    let mut replay = ReplayBuffer::new(cfg.buffer_capacity);
    let mut total_updates: u64 = 0;
    let mut skipped_rounds: u64 = 0;

    // Phase one: expert-only pretraining.
    for _ in 0..cfg.hp.pretrain_updates {
        match update_round(nets, &replay, expert, &cfg.hp, total_updates, &mut update_rng)? {
            RoundOutcome::Updated(_) => total_updates += 1,
            RoundOutcome::Skipped { .. } => skipped_rounds += 1,
        }
    }

    // Phase two: simulation with interleaved updates.
    let mut episode_log = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        let episode_seed: u64 = env_seed_rng.gen();
        let (mut state, mut obs) = env.reset(episode_seed);
        let mut cumulative_reward = 0.0;
        let mut steps: u64 = 0;
        while !state.done {
            let action_vec =
                select_action(nets, &obs, ActionMode::Stochastic, &mut action_rng)?;
            let action = ActionIncrement::from_vector(
                action_vec
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::Shape("policy action must have 5 components".into()))?,
            );
            let (next_state, next_obs, events) = env.step(&state, &action)?;
            let reward = compute_reward(
                &RewardInputs {
                    checkpoint_reached: events.checkpoint_reached,
                    force: events.applied_force_modulus,
                    dt: events.dt,
                    checkpoint_distance_mm: events.checkpoint_distance_mm,
                },
                &cfg.reward,
            )?;
            replay.push(Transition {
                obs: obs.to_vec(),
                action: action.to_vector().to_vec(),
                reward,
                next_obs: next_obs.to_vec(),
                done: next_state.done,
            });
            cumulative_reward += reward;
            steps += 1;
            state = next_state;
            obs = next_obs;

            if steps % cfg.hp.update_every == 0 {
                match update_round(
                    nets,
                    &replay,
                    expert,
                    &cfg.hp,
                    total_updates,
                    &mut update_rng,
                )? {
                    RoundOutcome::Updated(_) => total_updates += 1,
                    RoundOutcome::Skipped { .. } => skipped_rounds += 1,
                }
            }
        }
        let record = EpisodeRecord {
            episode,
            cumulative_reward,
            success: state.success,
            steps,
        };
        on_episode(&record);
        episode_log.push(record);
    }

    Ok(TrainOutput {
        episode_log,
        total_updates,
        skipped_rounds,
    })
}
