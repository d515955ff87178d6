//! Canal centerline geometry.
//!
//! The centerline is a planar, G1-continuous, arc-length parameterized curve
//! in the z = 0 plane: a straight entry segment, a circular arc realizing the
//! flexion angle, and a straight exit segment. The canal entry sits at the
//! origin pointing along +x; a flexion angle below 180 degrees bends the
//! canal toward +y, above 180 degrees toward -y.

use crate::{Error, Result};

use super::CanalAnatomy;

/// Fraction of the canal length taken by the straight entry segment.
pub const ENTRY_FRACTION: f64 = 0.3;
/// Fraction of the canal length taken by the circular arc.
pub const ARC_FRACTION: f64 = 0.4;

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, c: f64) -> Vec3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0, 0.0, 0.0]
    }
}

/// Point and unit tangent of the centerline at arc-length fraction `s`.
pub fn centerline_point(anatomy: &CanalAnatomy, s: f64) -> Result<(Vec3, Vec3)> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidInput(format!(
            "arc-length fraction must lie in [0, 1], got {s}"
        )));
    }
    let length = anatomy.canal_length_mm;
    let d = s * length;
    let entry_len = ENTRY_FRACTION * length;
    let arc_len = ARC_FRACTION * length;
    // Signed turn angle realized by the arc; 180 degrees of flexion is straight.
    let turn = (180.0 - anatomy.flexion_angle_deg).to_radians();

    if d <= entry_len || turn.abs() < 1e-12 {
        return Ok(([d, 0.0, 0.0], [1.0, 0.0, 0.0]));
    }

    let radius = arc_len / turn.abs();
    let sigma = turn.signum();
    if d <= entry_len + arc_len {
        let phi = (d - entry_len) / radius;
        let point = [
            entry_len + radius * phi.sin(),
            sigma * radius * (1.0 - phi.cos()),
            0.0,
        ];
        let tangent = [phi.cos(), sigma * phi.sin(), 0.0];
        return Ok((point, tangent));
    }

    let phi = turn.abs();
    let arc_end = [
        entry_len + radius * phi.sin(),
        sigma * radius * (1.0 - phi.cos()),
        0.0,
    ];
    let tangent = [phi.cos(), sigma * phi.sin(), 0.0];
    let rest = d - entry_len - arc_len;
    Ok((add(arc_end, scale(tangent, rest)), tangent))
}

/// Where a query point projects along the canal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxialRegion {
    /// Before the canal mouth: free space, no walls.
    BeforeEntry,
    Inside,
    /// Past the canal exit: free space, no walls.
    BeyondExit,
}

/// Result of a nearest-centerline query.
#[derive(Debug, Clone, Copy)]
pub struct NearestPoint {
    /// Arc-length fraction of the closest centerline point, clamped to [0, 1].
    pub s: f64,
    pub point: Vec3,
    pub distance: f64,
    pub region: AxialRegion,
}

/// Dense centerline sampling cached for nearest-point queries.
#[derive(Debug, Clone)]
pub struct Centerline {
    grid: Vec<Vec3>,
    entry_point: Vec3,
    entry_tangent: Vec3,
    exit_point: Vec3,
    exit_tangent: Vec3,
}

const GRID_POINTS: usize = 2048;

impl Centerline {
    pub fn new(anatomy: &CanalAnatomy) -> Result<Self> {
        let mut grid = Vec::with_capacity(GRID_POINTS + 1);
        for i in 0..=GRID_POINTS {
            let s = i as f64 / GRID_POINTS as f64;
            grid.push(centerline_point(anatomy, s)?.0);
        }
        let (entry_point, entry_tangent) = centerline_point(anatomy, 0.0)?;
        let (exit_point, exit_tangent) = centerline_point(anatomy, 1.0)?;
        Ok(Self {
            grid,
            entry_point,
            entry_tangent,
            exit_point,
            exit_tangent,
        })
    }

    /// Closest centerline point to `p`, refined between grid samples.
    pub fn nearest(&self, anatomy: &CanalAnatomy, p: Vec3) -> NearestPoint {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, c) in self.grid.iter().enumerate() {
            let d = sub(p, *c);
            let d2 = dot(d, d);
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let n = GRID_POINTS;
        let h = 1.0 / n as f64;
        let mut s = best as f64 * h;
        if best > 0 && best < n {
            // Parabolic refinement on squared distance through the three
            // neighboring samples.
            let f0 = dist2(p, self.grid[best - 1]);
            let f1 = best_d2;
            let f2 = dist2(p, self.grid[best + 1]);
            let denom = f0 - 2.0 * f1 + f2;
            if denom > 0.0 {
                let offset = 0.5 * (f0 - f2) / denom;
                if offset.abs() <= 1.0 {
                    s += offset * h;
                }
            }
        }
        s = s.clamp(0.0, 1.0);
        let (point, _) = centerline_point(anatomy, s).expect("s clamped to [0, 1]");
        let distance = norm(sub(p, point));

        let region = if best == 0 && dot(sub(p, self.entry_point), self.entry_tangent) < 0.0 {
            AxialRegion::BeforeEntry
        } else if best == n && dot(sub(p, self.exit_point), self.exit_tangent) > 0.0 {
            AxialRegion::BeyondExit
        } else {
            AxialRegion::Inside
        };
        NearestPoint {
            s,
            point,
            distance,
            region,
        }
    }
}

fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

/// Wrap an angle to the interval `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Unit forward axis of the instrument for given Euler angles.
///
/// Yaw rotates about +z, positive pitch tips the axis toward +z; roll does
/// not move the axis. Inverse: `pitch = asin(f_z)`, `yaw = atan2(f_y, f_x)`.
pub fn forward_axis(pitch: f64, yaw: f64) -> Vec3 {
    [
        pitch.cos() * yaw.cos(),
        pitch.cos() * yaw.sin(),
        pitch.sin(),
    ]
}
