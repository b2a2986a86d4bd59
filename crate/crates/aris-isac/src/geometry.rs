//! Node positions, ARIS kinematics, and map geometry.
//!
//! The ARIS is a kinematic point at fixed altitude: a 2-D velocity applied
//! for one slot duration moves it in the horizontal plane, and the flight
//! area is the closed square `[-w_max, w_max]^2`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in 3-D space, `z` is altitude in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        debug_assert!(z >= 0.0, "altitude must be nonnegative");
        Self { x, y, z }
    }

    /// Ground node at z = 0.
    pub fn ground(x: f64, y: f64) -> Self {
        Self::new(x, y, 0.0)
    }
}

/// Horizontal velocity of the ARIS in m/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Velocity2 {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity2 {
    pub fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    /// Clamp each component independently to `[-v_max, v_max]`.
    pub fn clamped(self, v_max: f64) -> Self {
        Self {
            vx: self.vx.clamp(-v_max, v_max),
            vy: self.vy.clamp(-v_max, v_max),
        }
    }
}

/// Flight-area and episode timing parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MapSpec {
    /// Half side length of the square flight area, meters.
    pub w_max: f64,
    /// ARIS hover altitude H, meters.
    pub altitude: f64,
    /// Slot duration, seconds.
    pub delta_t: f64,
    /// Number of time slots per episode.
    pub total_slots: usize,
}

impl MapSpec {
    pub fn new(w_max: f64, altitude: f64, delta_t: f64, total_slots: usize) -> Self {
        debug_assert!(w_max > 0.0 && delta_t > 0.0 && total_slots >= 1);
        Self {
            w_max,
            altitude,
            delta_t,
            total_slots,
        }
    }
}

/// One kinematic step: altitude is unchanged.
pub fn advance(p: Position3, v: Velocity2, delta_t: f64) -> Position3 {
    Position3 {
        x: p.x + v.vx * delta_t,
        y: p.y + v.vy * delta_t,
        z: p.z,
    }
}

/// Closed-boundary containment test on the horizontal square.
pub fn in_bounds(p: Position3, map: &MapSpec) -> bool {
    p.x >= -map.w_max && p.x <= map.w_max && p.y >= -map.w_max && p.y <= map.w_max
}

/// Euclidean distance between two points.
pub fn distance(a: Position3, b: Position3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Sine of the direction-of-arrival at the RIS toward `node`.
///
/// The RIS element array lies along the global x-axis, so `sin(theta)` is the
/// x-displacement over the 3-D distance.
pub fn doa_sine(aris: Position3, node: Position3) -> Result<f64> {
    let d = distance(aris, node);
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "DoA undefined for coincident points".into(),
        ));
    }
    Ok((node.x - aris.x) / d)
}
