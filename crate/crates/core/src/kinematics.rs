//! Differential-drive motion from WASD key states, pan-tilt actuation and
//! the shoulder-tap rotation controller.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, CameraModel, Pose2D};

/// Rotation goals count as reached once the heading error drops below this.
pub const GOAL_TOLERANCE: f64 = PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicsConfig {
    pub v_max: f64,
    pub omega_max: f64,
    pub tap_angle: f64,
    /// When set, any drive input cancels an active tap rotation.
    pub tap_cancelable: bool,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            omega_max: PI / 2.0,
            tap_angle: PI / 2.0,
            tap_cancelable: false,
        }
    }
}

/// Discrete drive intent: `forward` from W/S, `turn` from A/D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DriveCommand {
    forward: i8,
    turn: i8,
}

impl DriveCommand {
    pub const IDLE: DriveCommand = DriveCommand {
        forward: 0,
        turn: 0,
    };

    /// Values are reduced to their sign.
    pub fn new(forward: i8, turn: i8) -> Self {
        Self {
            forward: forward.signum(),
            turn: turn.signum(),
        }
    }

    /// Opposing keys cancel out.
    pub fn from_keys(w: bool, a: bool, s: bool, d: bool) -> Self {
        Self::new(w as i8 - s as i8, a as i8 - d as i8)
    }

    pub fn forward(&self) -> i8 {
        self.forward
    }

    pub fn turn(&self) -> i8 {
        self.turn
    }

    pub fn is_idle(&self) -> bool {
        self.forward == 0 && self.turn == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapSide {
    Left,
    Right,
}

impl TapSide {
    /// +1 for left (counterclockwise), -1 for right.
    pub fn sign(self) -> f64 {
        match self {
            TapSide::Left => 1.0,
            TapSide::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapEvent {
    pub side: TapSide,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose2D,
    pub linear_speed: f64,
    pub angular_speed: f64,
    pub cam: CameraModel,
    pub rotation_goal: Option<f64>,
}

impl RobotState {
    pub fn new(pose: Pose2D, cam: CameraModel) -> Self {
        Self {
            pose,
            linear_speed: 0.0,
            angular_speed: 0.0,
            cam,
            rotation_goal: None,
        }
    }

    pub fn is_rotating(&self) -> bool {
        self.rotation_goal.is_some()
    }
}

/// Advances the robot by one step of `dt` seconds.
///
/// While a tap rotation is active the controller owns the wheels: it turns
/// at up to `omega_max` toward the goal without overshooting and ignores
/// operator input, unless `tap_cancelable` is set and the operator is
/// pressing a key.
pub fn step_drive(
    state: &RobotState,
    cmd: DriveCommand,
    dt: f64,
    cfg: &KinematicsConfig,
) -> RobotState {
    debug_assert!(dt > 0.0);
    let mut next = *state;

    if let Some(goal) = state.rotation_goal {
        if !(cfg.tap_cancelable && !cmd.is_idle()) {
            let error = normalize_angle(goal - state.pose.heading);
            let max_step = cfg.omega_max * dt;
            let step = error.clamp(-max_step, max_step);
            next.linear_speed = 0.0;
            next.angular_speed = step / dt;
            next.pose = state.pose.rotated(step);
            if normalize_angle(goal - next.pose.heading).abs() < GOAL_TOLERANCE {
                next.rotation_goal = None;
            }
            return next;
        }
        next.rotation_goal = None;
    }

    let v = f64::from(cmd.forward()) * cfg.v_max;
    let omega = f64::from(cmd.turn()) * cfg.omega_max;
    next.linear_speed = v;
    next.angular_speed = omega;
    if cmd.is_idle() {
        return next;
    }
    let h = state.pose.heading;
    next.pose = Pose2D::new(
        state.pose.x + v * libm::cos(h) * dt,
        state.pose.y + v * libm::sin(h) * dt,
        h + omega * dt,
    );
    next
}

/// Starts a rotation of `tap_angle` toward the pressed side. Ignored while a
/// previous rotation is still running.
pub fn apply_tap(state: &RobotState, tap: TapEvent, cfg: &KinematicsConfig) -> RobotState {
    if state.rotation_goal.is_some() {
        return *state;
    }
    let mut next = *state;
    next.rotation_goal = Some(normalize_angle(
        state.pose.heading + tap.side.sign() * cfg.tap_angle,
    ));
    next
}

/// Pan and tilt are clamped to the camera's mechanical range.
pub fn set_pan_tilt(state: &RobotState, pan: f64, tilt: f64) -> RobotState {
    let mut next = *state;
    next.cam = state.cam.with_pan_tilt(pan, tilt);
    next
}
