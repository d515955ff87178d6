//! Quasi-static simulation of a rigid hysteroscope advancing through a
//! curved, narrow canal.
//!
//! Per step the pose moves by bounded increments, the contact force is
//! recomputed from instantaneous penetration, and checkpoints along the
//! centerline are consumed strictly in order when the tip enters their
//! trigger radius. An episode ends in success when the last checkpoint is
//! consumed, or in failure when the episode time cap elapses. Motion is pure
//! kinematics; contact forces penalize but never block it.

mod contact;
mod geometry;

pub use contact::{
    contact_force, instrument_samples, INSTRUMENT_RADIUS_MM, SHAFT_SAMPLE_COUNT,
    SHAFT_SAMPLE_SPACING_MM,
};
pub use geometry::{
    centerline_point, forward_axis, wrap_angle, AxialRegion, Centerline, NearestPoint, Vec3,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Observation vector length: tip position (3), Euler orientation (3),
/// target unit vector (3), contact force (3).
pub const OBS_DIM: usize = 12;
/// Action vector length: translation (3) plus pitch/yaw rotation (2).
pub const ACTION_DIM: usize = 5;
/// Workspace half-extent per axis, millimeters.
pub const WORKSPACE_HALF_EXTENT_MM: f64 = 100.0;

/// Position (mm) and orientation (roll, pitch, yaw; rad) of the rigid
/// instrument in world frame. The position is the tip point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentPose {
    pub position: Vec3,
    pub orientation: Vec3,
}

/// One agent action: per-axis translation and pitch/yaw increments, each in
/// `[-1, 1]` action units before scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionIncrement {
    pub translation: Vec3,
    pub rotation: [f64; 2],
}

impl ActionIncrement {
    /// Build from a raw 5-vector, clamping every component to `[-1, 1]`.
    pub fn from_vector(v: &[f64; ACTION_DIM]) -> Self {
        let c = |x: f64| x.clamp(-1.0, 1.0);
        Self {
            translation: [c(v[0]), c(v[1]), c(v[2])],
            rotation: [c(v[3]), c(v[4])],
        }
    }

    pub fn to_vector(&self) -> [f64; ACTION_DIM] {
        [
            self.translation[0],
            self.translation[1],
            self.translation[2],
            self.rotation[0],
            self.rotation[1],
        ]
    }

    pub fn zero() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: [0.0; 2],
        }
    }
}

/// Canal radius as a function of arc-length fraction.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusProfile {
    Constant(f64),
    /// Piecewise-linear over uniformly spaced knots on [0, 1].
    Interpolated(Vec<f64>),
}

impl RadiusProfile {
    pub fn radius_at(&self, s: f64) -> f64 {
        match self {
            RadiusProfile::Constant(r) => *r,
            RadiusProfile::Interpolated(knots) => {
                if knots.len() == 1 {
                    return knots[0];
                }
                let x = s.clamp(0.0, 1.0) * (knots.len() - 1) as f64;
                let i = (x.floor() as usize).min(knots.len() - 2);
                let frac = x - i as f64;
                knots[i] * (1.0 - frac) + knots[i + 1] * frac
            }
        }
    }

    pub fn min_radius(&self) -> f64 {
        match self {
            RadiusProfile::Constant(r) => *r,
            RadiusProfile::Interpolated(knots) => knots.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Geometric description of the canal.
#[derive(Debug, Clone, PartialEq)]
pub struct CanalAnatomy {
    /// Flexion angle in degrees; 180 is a straight canal.
    pub flexion_angle_deg: f64,
    pub canal_length_mm: f64,
    pub radius_profile: RadiusProfile,
    /// Ordered arc-length fractions of the checkpoints; the last must be 1.0.
    pub checkpoint_fractions: Vec<f64>,
    /// Distance at which the tip consumes the next checkpoint, millimeters.
    pub trigger_radius_mm: f64,
    pub entry_pose: InstrumentPose,
}

impl Default for CanalAnatomy {
    fn default() -> Self {
        Self {
            flexion_angle_deg: 150.0,
            canal_length_mm: 40.0,
            radius_profile: RadiusProfile::Constant(2.25),
            checkpoint_fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            trigger_radius_mm: 2.0,
            entry_pose: InstrumentPose {
                position: [0.0, 0.0, 0.0],
                orientation: [0.0, 0.0, 0.0],
            },
        }
    }
}

impl CanalAnatomy {
    pub fn validate(&self) -> Result<()> {
        if !(115.0..=185.0).contains(&self.flexion_angle_deg) {
            return Err(Error::InvalidInput(format!(
                "flexion angle must lie in [115, 185] degrees, got {}",
                self.flexion_angle_deg
            )));
        }
        if !(self.canal_length_mm > 0.0) {
            return Err(Error::InvalidInput("canal length must be positive".into()));
        }
        if !(self.radius_profile.min_radius() > 0.0) {
            return Err(Error::InvalidInput("canal radius must be positive".into()));
        }
        if self.checkpoint_fractions.is_empty() {
            return Err(Error::InvalidInput("need at least one checkpoint".into()));
        }
        let mut prev = 0.0;
        for &f in &self.checkpoint_fractions {
            if f <= prev || f > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "checkpoint fractions must be strictly increasing in (0, 1], got {:?}",
                    self.checkpoint_fractions
                )));
            }
            prev = f;
        }
        if (self.checkpoint_fractions.last().unwrap() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "last checkpoint must sit at the canal exit (s = 1.0)".into(),
            ));
        }
        if !(self.trigger_radius_mm > 0.0) {
            return Err(Error::InvalidInput("trigger radius must be positive".into()));
        }
        Ok(())
    }
}

/// How the contact force enters the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceObsMode {
    /// Full 3-vector, normalized by the force cap.
    Vector,
    /// Modulus in the first force slot, remaining slots zero.
    Modulus,
}

/// Full environment configuration: anatomy plus dynamics constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub anatomy: CanalAnatomy,
    /// Wall stiffness, newtons per millimeter of penetration.
    pub k_wall: f64,
    /// Upper bound on the contact force norm, newtons.
    pub force_cap: f64,
    /// Step duration, seconds.
    pub dt: f64,
    /// Episode time cap, seconds.
    pub episode_cap_s: f64,
    /// Translation scale: millimeters per unit action per axis.
    pub max_translation_step_mm: f64,
    /// Rotation scale: radians per unit action for pitch and yaw.
    pub max_rotation_step_rad: f64,
    pub force_obs: ForceObsMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            anatomy: CanalAnatomy::default(),
            k_wall: 0.5,
            force_cap: 5.0,
            dt: 0.02,
            episode_cap_s: 20.0,
            max_translation_step_mm: 1.0,
            max_rotation_step_rad: 0.0175,
            force_obs: ForceObsMode::Vector,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.anatomy.validate()?;
        for (name, v) in [
            ("k_wall", self.k_wall),
            ("force_cap", self.force_cap),
            ("dt", self.dt),
            ("episode_cap_s", self.episode_cap_s),
            ("max_translation_step_mm", self.max_translation_step_mm),
            ("max_rotation_step_rad", self.max_rotation_step_rad),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Episode state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub pose: InstrumentPose,
    pub next_checkpoint_index: usize,
    /// Exactly `dt * step_count`.
    pub elapsed_time: f64,
    pub step_count: u64,
    pub last_contact_force: Vec3,
    pub done: bool,
    pub success: bool,
}

/// The 12-dimensional observation vector.
pub type Observation = [f64; OBS_DIM];

/// Per-step quantities the reward and metrics consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvents {
    pub checkpoint_reached: bool,
    /// Distance from tip to the next unconsumed checkpoint after the step,
    /// millimeters; zero once every checkpoint is consumed.
    pub checkpoint_distance_mm: f64,
    /// Contact force modulus after the step, newtons.
    pub applied_force_modulus: f64,
    /// Step duration, seconds.
    pub dt: f64,
}

/// Simulation instance: configuration plus cached geometry.
///
/// One instance is owned by one worker; independent instances may run in
/// parallel, each with its own seed.
#[derive(Debug, Clone)]
pub struct CanalEnv {
    config: EnvConfig,
    centerline: Centerline,
    checkpoint_positions: Vec<Vec3>,
}

impl CanalEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let centerline = Centerline::new(&config.anatomy)?;
        let checkpoint_positions = config
            .anatomy
            .checkpoint_fractions
            .iter()
            .map(|&f| centerline_point(&config.anatomy, f).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            centerline,
            checkpoint_positions,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn anatomy(&self) -> &CanalAnatomy {
        &self.config.anatomy
    }

    pub fn centerline(&self) -> &Centerline {
        &self.centerline
    }

    pub fn checkpoint_positions(&self) -> &[Vec3] {
        &self.checkpoint_positions
    }

    pub fn checkpoint_count(&self) -> usize {
        self.checkpoint_positions.len()
    }

    /// Contact force at an arbitrary pose.
    pub fn contact_force_at(&self, pose: &InstrumentPose) -> Vec3 {
        contact_force(&self.config, &self.config.anatomy, &self.centerline, pose)
    }

    /// Nearest centerline point to an arbitrary position.
    pub fn nearest_centerline(&self, p: Vec3) -> NearestPoint {
        self.centerline.nearest(&self.config.anatomy, p)
    }

    /// Start a fresh episode.
    ///
    /// The entry pose is perturbed by uniform noise (at most 1 mm per
    /// position axis, 2 degrees in pitch and yaw) drawn from a generator
    /// seeded with `seed`, so identical seeds give identical episodes.
    pub fn reset(&self, seed: u64) -> (EnvState, Observation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entry = &self.config.anatomy.entry_pose;
        let max_angle = 2.0f64.to_radians();
        let position = [
            entry.position[0] + rng.gen_range(-1.0..=1.0),
            entry.position[1] + rng.gen_range(-1.0..=1.0),
            entry.position[2] + rng.gen_range(-1.0..=1.0),
        ];
        let orientation = [
            entry.orientation[0],
            wrap_angle(entry.orientation[1] + rng.gen_range(-max_angle..=max_angle)),
            wrap_angle(entry.orientation[2] + rng.gen_range(-max_angle..=max_angle)),
        ];
        let pose = InstrumentPose {
            position,
            orientation,
        };
        let force = self.contact_force_at(&pose);
        let state = EnvState {
            pose,
            next_checkpoint_index: 0,
            elapsed_time: 0.0,
            step_count: 0,
            last_contact_force: force,
            done: false,
            success: false,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    /// Advance one step. Rejects calls on finished episodes.
    pub fn step(
        &self,
        state: &EnvState,
        action: &ActionIncrement,
    ) -> Result<(EnvState, Observation, StepEvents)> {
        if state.done {
            return Err(Error::InvalidState(
                "cannot step a finished episode".into(),
            ));
        }
        let cfg = &self.config;
        let clamp_unit = |x: f64| x.clamp(-1.0, 1.0);
        let bound = WORKSPACE_HALF_EXTENT_MM;
        let mut position = state.pose.position;
        for k in 0..3 {
            position[k] = (position[k]
                + clamp_unit(action.translation[k]) * cfg.max_translation_step_mm)
                .clamp(-bound, bound);
        }
        let orientation = [
            state.pose.orientation[0],
            wrap_angle(
                state.pose.orientation[1]
                    + clamp_unit(action.rotation[0]) * cfg.max_rotation_step_rad,
            ),
            wrap_angle(
                state.pose.orientation[2]
                    + clamp_unit(action.rotation[1]) * cfg.max_rotation_step_rad,
            ),
        ];
        let pose = InstrumentPose {
            position,
            orientation,
        };

        let step_count = state.step_count + 1;
        let elapsed_time = cfg.dt * step_count as f64;
        let force = self.contact_force_at(&pose);

        let mut next_checkpoint_index = state.next_checkpoint_index;
        let mut checkpoint_reached = false;
        if next_checkpoint_index < self.checkpoint_positions.len() {
            let target = self.checkpoint_positions[next_checkpoint_index];
            if geometry::norm(geometry::sub(position, target)) <= self.config.anatomy.trigger_radius_mm
            {
                checkpoint_reached = true;
                next_checkpoint_index += 1;
            }
        }

        let checkpoint_distance_mm = if next_checkpoint_index < self.checkpoint_positions.len() {
            geometry::norm(geometry::sub(
                position,
                self.checkpoint_positions[next_checkpoint_index],
            ))
        } else {
            0.0
        };

        let success = next_checkpoint_index == self.checkpoint_positions.len();
        let done = success || elapsed_time >= cfg.episode_cap_s;

        let new_state = EnvState {
            pose,
            next_checkpoint_index,
            elapsed_time,
            step_count,
            last_contact_force: force,
            done,
            success,
        };
        let events = StepEvents {
            checkpoint_reached,
            checkpoint_distance_mm,
            applied_force_modulus: geometry::norm(force),
            dt: cfg.dt,
        };
        let obs = self.observe(&new_state);
        Ok((new_state, obs, events))
    }

    /// Assemble the observation for a state.
    pub fn observe(&self, state: &EnvState) -> Observation {
        let cfg = &self.config;
        let mut obs = [0.0; OBS_DIM];
        for k in 0..3 {
            obs[k] = state.pose.position[k] / cfg.anatomy.canal_length_mm;
            obs[3 + k] = state.pose.orientation[k];
        }
        if state.next_checkpoint_index < self.checkpoint_positions.len() {
            let target = self.checkpoint_positions[state.next_checkpoint_index];
            let dir = geometry::normalize(geometry::sub(target, state.pose.position));
            obs[6..9].copy_from_slice(&dir);
        }
        match cfg.force_obs {
            ForceObsMode::Vector => {
                for k in 0..3 {
                    obs[9 + k] = state.last_contact_force[k] / cfg.force_cap;
                }
            }
            ForceObsMode::Modulus => {
                obs[9] = geometry::norm(state.last_contact_force) / cfg.force_cap;
            }
        }
        obs
    }
}
