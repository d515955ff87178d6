//! Composite sparse + dense reward.
//!
//! One transition earns the checkpoint bonus `r_c` when a checkpoint was
//! reached, minus penalties for applied force, elapsed time, and distance to
//! the next checkpoint:
//!
//! `r = r_c * reached - k_F * F - k_t * dt - k_d * d_c`
//!
//! `F` is the contact-force modulus in newtons at the post-step state, `dt`
//! the transition duration in seconds, and `d_c` the distance to the next
//! checkpoint. `k_d` applies to `d_c` expressed in centimeters so the
//! per-step distance penalty stays commensurate with the force penalty.

use crate::{Error, Result};

/// Reward coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    /// Force penalty per newton.
    pub k_f: f64,
    /// Time penalty per second.
    pub k_t: f64,
    /// Sparse bonus per checkpoint reached.
    pub r_c: f64,
    /// Distance penalty per centimeter to the next checkpoint.
    pub k_d: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            k_f: 2.0,
            k_t: 0.1,
            r_c: 200.0,
            k_d: 0.4,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_F", self.k_f),
            ("k_t", self.k_t),
            ("r_c", self.r_c),
            ("k_d", self.k_d),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "reward coefficient {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-transition quantities the reward depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    pub checkpoint_reached: bool,
    /// Applied force modulus, newtons.
    pub force: f64,
    /// Transition duration, seconds.
    pub dt: f64,
    /// Distance to the next checkpoint, millimeters.
    pub checkpoint_distance_mm: f64,
}

/// Evaluate the reward for one transition.
pub fn compute_reward(inputs: &RewardInputs, cfg: &RewardConfig) -> Result<f64> {
    if !(inputs.force >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "force must be >= 0, got {}",
            inputs.force
        )));
    }
    if !(inputs.dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dt must be > 0, got {}",
            inputs.dt
        )));
    }
    if !(inputs.checkpoint_distance_mm >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "checkpoint distance must be >= 0, got {}",
            inputs.checkpoint_distance_mm
        )));
    }
    let bonus = if inputs.checkpoint_reached { cfg.r_c } else { 0.0 };
    let d_c_cm = inputs.checkpoint_distance_mm / 10.0;
    Ok(bonus - cfg.k_f * inputs.force - cfg.k_t * inputs.dt - cfg.k_d * d_c_cm)
}
