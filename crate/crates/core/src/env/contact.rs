//! Penalty contact model.
//!
//! The rigid instrument is sampled at the tip plus four shaft points spaced
//! 5 mm behind the tip along the instrument axis. Each sample that projects
//! inside the canal contributes a linear penalty force `k_wall * penetration`
//! directed from the wall back toward the centerline, where the penetration
//! is how far the instrument surface extends past the unstressed wall:
//!
//! `penetration = max(0, d_perp + r_instrument - r_canal(s))`
//!
//! Tissue compliance is folded into `k_wall`, so a tight canal (canal radius
//! below the instrument radius) yields sustained contact during passage, as
//! on the physical simulator. A sample exactly on the centerline is squeezed
//! symmetrically from all sides and contributes no net direction. The total
//! force is clamped to `force_cap`.

use super::geometry::{self, AxialRegion, Centerline, Vec3};
use super::{CanalAnatomy, EnvConfig, InstrumentPose};

/// Radius of the instrument tip sphere and shaft samples, millimeters.
pub const INSTRUMENT_RADIUS_MM: f64 = 2.5;
/// Spacing of shaft samples behind the tip, millimeters.
pub const SHAFT_SAMPLE_SPACING_MM: f64 = 5.0;
/// Number of shaft samples behind the tip.
pub const SHAFT_SAMPLE_COUNT: usize = 4;

/// Sample points representing the instrument: tip first, then shaft points.
pub fn instrument_samples(pose: &InstrumentPose) -> [Vec3; SHAFT_SAMPLE_COUNT + 1] {
    let axis = geometry::forward_axis(pose.orientation[1], pose.orientation[2]);
    let mut samples = [[0.0; 3]; SHAFT_SAMPLE_COUNT + 1];
    samples[0] = pose.position;
    for (j, sample) in samples.iter_mut().enumerate().skip(1) {
        *sample = geometry::sub(
            pose.position,
            geometry::scale(axis, j as f64 * SHAFT_SAMPLE_SPACING_MM),
        );
    }
    samples
}

/// Total contact force on the instrument, newtons, in world frame.
///
/// Always finite; norm clamped to `config.force_cap`.
pub fn contact_force(
    config: &EnvConfig,
    anatomy: &CanalAnatomy,
    centerline: &Centerline,
    pose: &InstrumentPose,
) -> Vec3 {
    let mut total = [0.0; 3];
    for sample in instrument_samples(pose) {
        let near = centerline.nearest(anatomy, sample);
        if near.region != AxialRegion::Inside {
            continue;
        }
        let canal_radius = anatomy.radius_profile.radius_at(near.s);
        let penetration = near.distance + INSTRUMENT_RADIUS_MM - canal_radius;
        if penetration <= 0.0 || near.distance <= 1e-12 {
            continue;
        }
        let toward_center = geometry::scale(
            geometry::sub(near.point, sample),
            1.0 / near.distance,
        );
        total = geometry::add(
            total,
            geometry::scale(toward_center, config.k_wall * penetration),
        );
    }
    let magnitude = geometry::norm(total);
    if magnitude > config.force_cap {
        total = geometry::scale(total, config.force_cap / magnitude);
    }
    total
}
