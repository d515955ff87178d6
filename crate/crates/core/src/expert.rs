//! Scripted path-following controller that stands in for clinician
//! demonstrations.
//!
//! The controller steers the tip toward a lookahead point on the canal
//! centerline and aligns the instrument axis with the local tangent, with
//! optional Gaussian action noise. It uses privileged centerline knowledge,
//! which is acceptable here because the learning agent also receives
//! privileged checkpoint directions in its observation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{wrap_angle, ActionIncrement, CanalEnv, EnvState};
use crate::reward::{compute_reward, RewardConfig, RewardInputs};
use crate::sac::Transition;
use crate::{Error, Result};

/// Gains and noise of the scripted controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPolicyParams {
    /// Desired millimeters of motion per millimeter of positional error.
    pub gain_translation: f64,
    /// Desired radians of rotation per radian of angular error.
    pub gain_rotation: f64,
    /// Standard deviation of Gaussian noise added in action units.
    pub action_noise_std: f64,
    /// Arc-length fraction ahead of the nearest centerline point to aim at.
    pub lookahead: f64,
}

impl Default for ExpertPolicyParams {
    fn default() -> Self {
        Self {
            gain_translation: 0.8,
            gain_rotation: 0.6,
            action_noise_std: 0.05,
            lookahead: 0.05,
        }
    }
}

impl ExpertPolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_translation >= 0.0) || !(self.gain_rotation >= 0.0) {
            return Err(Error::InvalidInput("expert gains must be >= 0".into()));
        }
        if !(0.0..0.5).contains(&self.action_noise_std) {
            return Err(Error::InvalidInput(format!(
                "expert action noise std must lie in [0, 0.5), got {}",
                self.action_noise_std
            )));
        }
        if !(self.lookahead > 0.0 && self.lookahead <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "lookahead must lie in (0, 1], got {}",
                self.lookahead
            )));
        }
        Ok(())
    }
}

/// Proportional path-following action for the current state.
///
/// Translation steers the tip toward the centerline point one lookahead
/// ahead of its nearest projection; pitch and yaw align the instrument axis
/// with the tangent there. Noise is added per component, then everything is
/// clamped to `[-1, 1]`.
pub fn expert_action<R: Rng + ?Sized>(
    state: &EnvState,
    env: &CanalEnv,
    params: &ExpertPolicyParams,
    rng: &mut R,
) -> Result<ActionIncrement> {
    if state.done {
        return Err(Error::InvalidState("expert asked to act on a finished episode".into()));
    }
    let cfg = env.config();
    let near = env.nearest_centerline(state.pose.position);
    let target_s = (near.s + params.lookahead).min(1.0);
    let (target_point, target_tangent) =
        crate::env::centerline_point(env.anatomy(), target_s)?;

    let mut raw = [0.0f64; 5];
    for k in 0..3 {
        let error_mm = target_point[k] - state.pose.position[k];
        raw[k] = params.gain_translation * error_mm / cfg.max_translation_step_mm;
    }

    let desired_pitch = target_tangent[2].asin();
    let desired_yaw = target_tangent[1].atan2(target_tangent[0]);
    let pitch_error = wrap_angle(desired_pitch - state.pose.orientation[1]);
    let yaw_error = wrap_angle(desired_yaw - state.pose.orientation[2]);
    raw[3] = params.gain_rotation * pitch_error / cfg.max_rotation_step_rad;
    raw[4] = params.gain_rotation * yaw_error / cfg.max_rotation_step_rad;

    if params.action_noise_std > 0.0 {
        for r in raw.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            *r += params.action_noise_std * noise;
        }
    }
    Ok(ActionIncrement::from_vector(&raw))
}

/// Transitions of one demonstration episode plus its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationEpisode {
    pub transitions: Vec<Transition>,
    pub success: bool,
    /// Seed passed to `env.reset` for this episode.
    pub reset_seed: u64,
}

/// A batch of demonstration episodes with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationSet {
    pub episodes: Vec<DemonstrationEpisode>,
    /// Fingerprint of the environment configuration the data was rolled on.
    pub anatomy_hash: u64,
    /// Master seed of the generator; per-episode reset seeds derive from it.
    pub seed: u64,
}

impl DemonstrationSet {
    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(|e| e.transitions.len()).sum()
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        let ok = self.episodes.iter().filter(|e| e.success).count();
        ok as f64 / self.episodes.len() as f64
    }

    pub fn all_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.episodes.iter().flat_map(|e| e.transitions.iter())
    }
}

/// Reset seed of demonstration episode `index` under master seed `seed`.
///
/// Part of the demonstration-file contract: replaying an episode needs only
/// the master seed and the episode index.
pub fn demo_episode_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value = 0;
    for _ in 0..=index {
        value = rng.gen();
    }
    value
}

/// Roll out demonstration episodes with the scripted controller.
///
/// Rewards are computed with the same reward definition used for the agent's
/// own transitions. Aborts when more than half of the episodes fail, which
/// signals an anatomy the controller cannot solve under current parameters.
pub fn generate_demonstrations(
    env: &CanalEnv,
    params: &ExpertPolicyParams,
    reward_cfg: &RewardConfig,
    anatomy_hash: u64,
    episode_count: u64,
    seed: u64,
) -> Result<DemonstrationSet> {
    if episode_count == 0 {
        return Err(Error::InvalidInput(
            "demonstration generation needs at least one episode".into(),
        ));
    }
    params.validate()?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut episodes = Vec::with_capacity(episode_count as usize);
    let mut failures = 0u64;
    for _ in 0..episode_count {
        let reset_seed: u64 = seed_rng.gen();
        let (mut state, mut obs) = env.reset(reset_seed);
        let mut transitions = Vec::new();
        while !state.done {
            let action = expert_action(&state, env, params, &mut noise_rng)?;
            let (next_state, next_obs, events) = env.step(&state, &action)?;
            let reward = compute_reward(
                &RewardInputs {
                    checkpoint_reached: events.checkpoint_reached,
                    force: events.applied_force_modulus,
                    dt: events.dt,
                    checkpoint_distance_mm: events.checkpoint_distance_mm,
                },
                reward_cfg,
            )?;
            transitions.push(Transition {
                obs: obs.to_vec(),
                action: action.to_vector().to_vec(),
                reward,
                next_obs: next_obs.to_vec(),
                done: next_state.done,
            });
            state = next_state;
            obs = next_obs;
        }
        if !state.success {
            failures += 1;
        }
        episodes.push(DemonstrationEpisode {
            transitions,
            success: state.success,
            reset_seed,
        });
    }
    if failures * 2 > episode_count {
        return Err(Error::InvalidState(format!(
            "oracle failed {failures} of {episode_count} episodes; anatomy likely unsolvable \
             under current expert parameters"
        )));
    }
    Ok(DemonstrationSet {
        episodes,
        anatomy_hash,
        seed,
    })
}

const DEMO_MAGIC: &str = "# canalrl-demos v1";

/// Demonstration file contents: one metadata header line, then one record per
/// transition with the fixed field order `12 obs, 5 action, reward,
/// 12 next obs, done`, space-delimited decimal text. Episode boundaries are
/// the records with `done = 1`; per-episode reset seeds derive from the
/// master seed, so nothing else needs storing.
pub fn demonstrations_to_text(set: &DemonstrationSet) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{DEMO_MAGIC} anatomy_hash={:016x} seed={} episodes={} transitions={}\n",
        set.anatomy_hash,
        set.seed,
        set.episodes.len(),
        set.transition_count()
    ));
    for t in set.all_transitions() {
        let mut fields: Vec<String> = Vec::with_capacity(31);
        fields.extend(t.obs.iter().map(|v| format!("{v}")));
        fields.extend(t.action.iter().map(|v| format!("{v}")));
        fields.push(format!("{}", t.reward));
        fields.extend(t.next_obs.iter().map(|v| format!("{v}")));
        fields.push(if t.done { "1".into() } else { "0".into() });
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_demonstrations(set: &DemonstrationSet, path: &std::path::Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, demonstrations_to_text(set))?;
    Ok(())
}

/// Parse a demonstration file and verify it against the environment.
///
/// Every episode is replayed from its derived reset seed; stored
/// observations, rewards, and done flags must reproduce bitwise, which also
/// recovers each episode's success outcome. A file rolled on a different
/// environment or reward configuration fails this check.
pub fn demonstrations_from_text(
    text: &str,
    env: &CanalEnv,
    reward_cfg: &RewardConfig,
) -> Result<DemonstrationSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty demonstration file".into(),
    })?;
    if !header.starts_with(DEMO_MAGIC) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected `{DEMO_MAGIC} ...` header"),
        });
    }
    let mut anatomy_hash = None;
    let mut seed = None;
    let mut episodes_declared = None;
    let mut transitions_declared = None;
    for part in header.split_whitespace() {
        if let Some((key, value)) = part.split_once('=') {
            match key {
                "anatomy_hash" => {
                    anatomy_hash =
                        Some(u64::from_str_radix(value, 16).map_err(|_| Error::Parse {
                            line: 1,
                            msg: format!("bad anatomy_hash `{value}`"),
                        })?)
                }
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|_| Error::Parse {
                        line: 1,
                        msg: format!("bad seed `{value}`"),
                    })?)
                }
                "episodes" => {
                    episodes_declared = Some(value.parse::<usize>().map_err(|_| Error::Parse {
                        line: 1,
                        msg: format!("bad episode count `{value}`"),
                    })?)
                }
                "transitions" => {
                    transitions_declared =
                        Some(value.parse::<usize>().map_err(|_| Error::Parse {
                            line: 1,
                            msg: format!("bad transition count `{value}`"),
                        })?)
                }
                _ => {}
            }
        }
    }
    let (anatomy_hash, seed) = match (anatomy_hash, seed) {
        (Some(h), Some(s)) => (h, s),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "header must carry anatomy_hash and seed".into(),
            })
        }
    };

    let obs_dim = crate::env::OBS_DIM;
    let act_dim = crate::env::ACTION_DIM;
    let record_len = 2 * obs_dim + act_dim + 2;
    let mut transitions: Vec<Transition> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != record_len {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "transition record needs {record_len} fields, got {}",
                    fields.len()
                ),
            });
        }
        let mut nums = Vec::with_capacity(record_len - 1);
        for f in &fields[..record_len - 1] {
            nums.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse `{f}`"),
            })?);
        }
        let done = match fields[record_len - 1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("done flag must be 0 or 1, got `{other}`"),
                })
            }
        };
        transitions.push(Transition {
            obs: nums[..obs_dim].to_vec(),
            action: nums[obs_dim..obs_dim + act_dim].to_vec(),
            reward: nums[obs_dim + act_dim],
            next_obs: nums[obs_dim + act_dim + 1..record_len - 1].to_vec(),
            done,
        });
    }
    if let Some(n) = transitions_declared {
        if n != transitions.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "header declares {n} transitions, file holds {}",
                    transitions.len()
                ),
            });
        }
    }
    if transitions.last().map(|t| t.done) != Some(true) {
        return Err(Error::InvalidInput(
            "demonstration file must end on a finished episode".into(),
        ));
    }

    // Split on done flags, then replay each episode to verify integrity and
    // recover its outcome.
    let mut episodes = Vec::new();
    let mut current = Vec::new();
    for t in transitions {
        let done = t.done;
        current.push(t);
        if done {
            episodes.push(std::mem::take(&mut current));
        }
    }
    if let Some(n) = episodes_declared {
        if n != episodes.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {n} episodes, file holds {}", episodes.len()),
            });
        }
    }

    let mut verified = Vec::with_capacity(episodes.len());
    for (index, stored) in episodes.into_iter().enumerate() {
        let reset_seed = demo_episode_seed(seed, index as u64);
        let (mut state, mut obs) = env.reset(reset_seed);
        for (j, t) in stored.iter().enumerate() {
            let matches = t.obs.as_slice() == obs.as_slice();
            if !matches {
                return Err(Error::InvalidState(format!(
                    "episode {index} transition {j} does not replay: observation drift \
                     (file generated on a different environment configuration?)"
                )));
            }
            let action = ActionIncrement::from_vector(
                t.action
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::Shape("stored action must have 5 components".into()))?,
            );
            let (next_state, next_obs, events) = env.step(&state, &action)?;
            let reward = compute_reward(
                &RewardInputs {
                    checkpoint_reached: events.checkpoint_reached,
                    force: events.applied_force_modulus,
                    dt: events.dt,
                    checkpoint_distance_mm: events.checkpoint_distance_mm,
                },
                reward_cfg,
            )?;
            if reward != t.reward || next_state.done != t.done {
                return Err(Error::InvalidState(format!(
                    "episode {index} transition {j} does not replay: reward or done drift"
                )));
            }
            state = next_state;
            obs = next_obs;
        }
        if !state.done {
            return Err(Error::InvalidState(format!(
                "episode {index} record ends before the episode does"
            )));
        }
        verified.push(DemonstrationEpisode {
            transitions: stored,
            success: state.success,
            reset_seed,
        });
    }

    Ok(DemonstrationSet {
        episodes: verified,
        anatomy_hash,
        seed,
    })
}

pub fn read_demonstrations(
    path: &std::path::Path,
    env: &CanalEnv,
    reward_cfg: &RewardConfig,
) -> Result<DemonstrationSet> {
    demonstrations_from_text(&std::fs::read_to_string(path)?, env, reward_cfg)
}
