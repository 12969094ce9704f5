use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Pose};
use crate::world::WorldSpec;

pub const ROBOT_RADIUS: f64 = 0.18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub w_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            v_max: 0.5,
            w_max: 1.5,
        }
    }
}

impl Limits {
    /// Clamps a command into the limits. Reverse driving is not allowed.
    pub fn clamp(&self, v: f64, w: f64) -> (f64, f64) {
        (v.clamp(0.0, self.v_max), w.clamp(-self.w_max, self.w_max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub v: f64,
    pub w: f64,
    pub radius: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        RobotState {
            pose,
            v: 0.0,
            w: 0.0,
            radius: ROBOT_RADIUS,
        }
    }
}

/// Exact unicycle motion under constant `(v, w)` for `dt` seconds.
///
/// Uses the chord form `2(v/w)·sin(w·dt/2)` along the mean heading, which
/// stays accurate as `w` approaches zero.
pub fn integrate(pose: &Pose, v: f64, w: f64, dt: f64) -> Pose {
    let half = 0.5 * w * dt;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let chord = v * dt * sinc;
    let mid = pose.theta + half;
    Pose::new(
        pose.x + chord * mid.cos(),
        pose.y + chord * mid.sin(),
        normalize_angle(pose.theta + w * dt),
    )
}

/// Advances the robot by one physics step, clamping the command first.
pub fn step(state: &RobotState, cmd: (f64, f64), dt: f64, limits: &Limits) -> RobotState {
    assert!(dt > 0.0, "dt must be positive");
    let (v, w) = limits.clamp(cmd.0, cmd.1);
    RobotState {
        pose: integrate(&state.pose, v, w, dt),
        v,
        w,
        radius: state.radius,
    }
}

/// Whether a disc of `radius` at `pose` overlaps a wall, obstacle, or the
/// room boundary. Touching is not a collision.
pub fn check_collision(world: &WorldSpec, pose: &Pose, radius: f64) -> bool {
    world.clearance(pose.position()) < radius
}
