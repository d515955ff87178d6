//! Run configuration: flat key-value text with section prefixes.
//!
//! Example entry: `anatomy.flexion_angle_deg = 150`. Every key has a default,
//! so an empty file is a valid configuration. Unknown keys are rejected with
//! the offending line number. Command-line flags override file values, which
//! override defaults.

use std::path::{Path, PathBuf};

use crate::env::{CanalAnatomy, EnvConfig, ForceObsMode, RadiusProfile};
use crate::expert::ExpertPolicyParams;
use crate::reward::RewardConfig;
use crate::sac::SacHyperparams;
use crate::{Error, Result};

/// Complete configuration for demo generation, training, and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub hp: SacHyperparams,
    /// Training episodes after pretraining.
    pub episodes: u64,
    pub buffer_capacity: usize,
    pub expert: ExpertPolicyParams,
    /// Default episode count for demonstration generation.
    pub demo_episodes: u64,
    pub checkpoint_dir: PathBuf,
    pub log_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            hp: SacHyperparams::default(),
            episodes: 1000,
            buffer_capacity: 1_000_000,
            expert: ExpertPolicyParams::default(),
            demo_episodes: 100,
            checkpoint_dir: PathBuf::from("runs/checkpoints"),
            log_dir: PathBuf::from("runs/logs"),
            seed: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse value `{value}` for key `{key}`"),
    })
}

impl RunConfig {
    /// Parse a configuration file's contents on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.apply_kv(key.trim(), value.trim(), line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Apply one `key = value` entry; `line` is used for error reporting.
    pub fn apply_kv(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "anatomy.flexion_angle_deg" => {
                self.env.anatomy.flexion_angle_deg = parse_num(key, value, line)?
            }
            "anatomy.canal_length_mm" => {
                self.env.anatomy.canal_length_mm = parse_num(key, value, line)?
            }
            "anatomy.canal_radius_mm" => {
                self.env.anatomy.radius_profile =
                    RadiusProfile::Constant(parse_num(key, value, line)?)
            }
            "anatomy.checkpoint_fractions" => {
                let fractions = value
                    .split(',')
                    .map(|v| parse_num::<f64>(key, v, line))
                    .collect::<Result<Vec<_>>>()?;
                self.env.anatomy.checkpoint_fractions = fractions;
            }
            "anatomy.trigger_radius_mm" => {
                self.env.anatomy.trigger_radius_mm = parse_num(key, value, line)?
            }
            "anatomy.k_wall" => self.env.k_wall = parse_num(key, value, line)?,
            "anatomy.force_cap" => self.env.force_cap = parse_num(key, value, line)?,
            "anatomy.dt" => self.env.dt = parse_num(key, value, line)?,
            "anatomy.episode_cap_s" | "sac.episode_cap_s" => {
                self.env.episode_cap_s = parse_num(key, value, line)?
            }
            "anatomy.max_translation_step_mm" => {
                self.env.max_translation_step_mm = parse_num(key, value, line)?
            }
            "anatomy.max_rotation_step_rad" => {
                self.env.max_rotation_step_rad = parse_num(key, value, line)?
            }
            "anatomy.force_obs" => {
                self.env.force_obs = match value {
                    "vector" => ForceObsMode::Vector,
                    "modulus" => ForceObsMode::Modulus,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!(
                                "anatomy.force_obs must be `vector` or `modulus`, got `{other}`"
                            ),
                        })
                    }
                }
            }
            "reward.k_F" => self.reward.k_f = parse_num(key, value, line)?,
            "reward.k_t" => self.reward.k_t = parse_num(key, value, line)?,
            "reward.r_c" => self.reward.r_c = parse_num(key, value, line)?,
            "reward.k_d" => self.reward.k_d = parse_num(key, value, line)?,
            "sac.episodes" => self.episodes = parse_num(key, value, line)?,
            "sac.gamma" => self.hp.gamma = parse_num(key, value, line)?,
            "sac.alpha" => self.hp.alpha = parse_num(key, value, line)?,
            "sac.tau" => self.hp.tau = parse_num(key, value, line)?,
            "sac.batch_size" => self.hp.batch_size = parse_num(key, value, line)?,
            "sac.update_every" => self.hp.update_every = parse_num(key, value, line)?,
            "sac.expert_interleave" => self.hp.expert_interleave = parse_num(key, value, line)?,
            "sac.pretrain_updates" => self.hp.pretrain_updates = parse_num(key, value, line)?,
            "sac.buffer_capacity" => self.buffer_capacity = parse_num(key, value, line)?,
            "expert.gain_translation" => {
                self.expert.gain_translation = parse_num(key, value, line)?
            }
            "expert.gain_rotation" => self.expert.gain_rotation = parse_num(key, value, line)?,
            "expert.action_noise_std" => {
                self.expert.action_noise_std = parse_num(key, value, line)?
            }
            "expert.lookahead" => self.expert.lookahead = parse_num(key, value, line)?,
            "expert.demo_episodes" => self.demo_episodes = parse_num(key, value, line)?,
            "paths.checkpoint_dir" => self.checkpoint_dir = PathBuf::from(value),
            "paths.log_dir" => self.log_dir = PathBuf::from(value),
            "seed" | "sac.seed" => self.seed = parse_num(key, value, line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown configuration key `{other}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.reward.validate()?;
        self.hp.validate()?;
        self.expert.validate()?;
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidInput("buffer capacity must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text of the environment and reward sections, the part of the
    /// configuration that demonstration data depends on.
    pub fn data_config_string(&self) -> String {
        let a = &self.env.anatomy;
        let radius = match &a.radius_profile {
            RadiusProfile::Constant(r) => format!("{r}"),
            RadiusProfile::Interpolated(knots) => knots
                .iter()
                .map(|k| format!("{k}"))
                .collect::<Vec<_>>()
                .join(","),
        };
        let fractions = a
            .checkpoint_fractions
            .iter()
            .map(|f| format!("{f}"))
            .collect::<Vec<_>>()
            .join(",");
        let force_obs = match self.env.force_obs {
            ForceObsMode::Vector => "vector",
            ForceObsMode::Modulus => "modulus",
        };
        format!(
            "anatomy.flexion_angle_deg = {}\n\
             anatomy.canal_length_mm = {}\n\
             anatomy.canal_radius_mm = {radius}\n\
             anatomy.checkpoint_fractions = {fractions}\n\
             anatomy.trigger_radius_mm = {}\n\
             anatomy.k_wall = {}\n\
             anatomy.force_cap = {}\n\
             anatomy.dt = {}\n\
             anatomy.episode_cap_s = {}\n\
             anatomy.max_translation_step_mm = {}\n\
             anatomy.max_rotation_step_rad = {}\n\
             anatomy.force_obs = {force_obs}\n\
             reward.k_F = {}\n\
             reward.k_t = {}\n\
             reward.r_c = {}\n\
             reward.k_d = {}\n",
            a.flexion_angle_deg,
            a.canal_length_mm,
            a.trigger_radius_mm,
            self.env.k_wall,
            self.env.force_cap,
            self.env.dt,
            self.env.episode_cap_s,
            self.env.max_translation_step_mm,
            self.env.max_rotation_step_rad,
            self.reward.k_f,
            self.reward.k_t,
            self.reward.r_c,
            self.reward.k_d,
        )
    }

    /// Fingerprint of the data-bearing configuration; demonstration files and
    /// checkpoints carry it so stale data is refused.
    pub fn data_hash(&self) -> u64 {
        fnv1a64(self.data_config_string().as_bytes())
    }

    /// Anatomy in a form the environment consumes.
    pub fn build_anatomy(&self) -> CanalAnatomy {
        self.env.anatomy.clone()
    }
}

/// 64-bit FNV-1a content fingerprint (not cryptographic).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
