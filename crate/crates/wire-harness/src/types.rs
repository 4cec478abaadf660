//! Planar domain types shared across the stack: world poses, the wire state,
//! incremental control commands, and the fix-point frame.
//!
//! Units are millimetres, radians, and newtons throughout. The wire state is
//! always expressed in the fix-point frame: a pure translation of the world
//! frame whose origin sits at the most recent wire anchor (connector or
//! engaged clamp).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One control period in seconds; every command is executed over this window.
pub const CONTROL_PERIOD_S: f64 = 0.5;

/// Per-step translation limit in millimetres (0.1 m/s over one period).
pub const MAX_STEP_TRANSLATION_MM: f64 = 50.0;

/// Per-step rotation limit in radians (6 deg/s over one period).
pub const MAX_STEP_ROTATION_RAD: f64 = 3.0 * PI / 180.0;

/// Slack allowed when validating command bounds, to absorb round-off from
/// solvers that project exactly onto the box.
pub const BOUNDS_EPS: f64 = 1e-9;

/// Wrap an angle into the half-open interval (−π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// A point in the world frame, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
}

impl Pose2D {
    pub const ORIGIN: Pose2D = Pose2D { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Pose2D {
        Pose2D::new(self.x + dx, self.y + dy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Relative twist between the wire direction and the gripper, radians.
///
/// Unbounded: the gripper may wrap the wire several times, so no wrapping is
/// applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistAngle(pub f64);

impl TwistAngle {
    pub const ZERO: TwistAngle = TwistAngle(0.0);

    pub fn radians(&self) -> f64 {
        self.0
    }
}

/// The wire state s = (x, y, θ, f): gripper pose relative to the fix-point
/// plus the tension magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireState {
    /// Gripper position along fix-point frame X, millimetres.
    pub x: f64,
    /// Gripper position along fix-point frame Y, millimetres.
    pub y: f64,
    /// Gripper rotation about Z, radians, wrapped to (−π, π].
    pub theta: f64,
    /// Tension magnitude (2-norm of the planar tension force), newtons, ≥ 0.
    pub f: f64,
}

impl WireState {
    /// Build a state, wrapping `theta` into (−π, π]. Tension must be ≥ 0.
    pub fn new(x: f64, y: f64, theta: f64, f: f64) -> Self {
        debug_assert!(f >= 0.0, "tension must be non-negative, got {f}");
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            f,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite() && self.f.is_finite()
    }
}

/// Incremental motion executed over one control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Translation along X, millimetres.
    pub dx: f64,
    /// Translation along Y, millimetres.
    pub dy: f64,
    /// Rotation about Z, radians.
    pub dtheta: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand {
        dx: 0.0,
        dy: 0.0,
        dtheta: 0.0,
    };

    pub const fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }

    /// True when every component is finite and within the per-step limits
    /// (±50 mm, ±3°), with a small slack for solver round-off.
    pub fn in_bounds(&self) -> bool {
        self.dx.is_finite()
            && self.dy.is_finite()
            && self.dtheta.is_finite()
            && self.dx.abs() <= MAX_STEP_TRANSLATION_MM + BOUNDS_EPS
            && self.dy.abs() <= MAX_STEP_TRANSLATION_MM + BOUNDS_EPS
            && self.dtheta.abs() <= MAX_STEP_ROTATION_RAD + BOUNDS_EPS
    }

    /// Clamp every component into the per-step box.
    pub fn clamped(self) -> Self {
        Self {
            dx: self.dx.clamp(-MAX_STEP_TRANSLATION_MM, MAX_STEP_TRANSLATION_MM),
            dy: self.dy.clamp(-MAX_STEP_TRANSLATION_MM, MAX_STEP_TRANSLATION_MM),
            dtheta: self
                .dtheta
                .clamp(-MAX_STEP_ROTATION_RAD, MAX_STEP_ROTATION_RAD),
        }
    }
}

/// The fix-point frame: a pure translation of the world frame with its origin
/// at the current wire anchor. No rotation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixPointFrame {
    pub origin: Pose2D,
}

impl FixPointFrame {
    pub const fn new(origin: Pose2D) -> Self {
        Self { origin }
    }

    /// World pose → fix-point frame coordinates (pure translation).
    pub fn world_to_fixpoint(&self, world: Pose2D) -> (f64, f64) {
        (world.x - self.origin.x, world.y - self.origin.y)
    }

    /// Fix-point frame coordinates → world pose.
    pub fn fixpoint_to_world(&self, local: (f64, f64)) -> Pose2D {
        Pose2D::new(local.0 + self.origin.x, local.1 + self.origin.y)
    }
}
