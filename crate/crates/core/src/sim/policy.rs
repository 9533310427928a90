//! Leader and follower behaviours, shared by the scripted local visitor and
//! the scripted remote operator.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, normalize_angle, Point2, Pose2D};
use crate::kinematics::DriveCommand;
use crate::sim::scenario::Board;

/// Below this gap a follower counts as on target.
pub const FOLLOW_DEADBAND_M: f64 = 0.05;

/// World-frame planar velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

impl Velocity {
    pub const ZERO: Velocity = Velocity { vx: 0.0, vy: 0.0 };

    pub fn toward(from: Point2, to: Point2, speed: f64) -> Velocity {
        let d = distance(from, to);
        if d <= f64::EPSILON {
            return Velocity::ZERO;
        }
        Velocity {
            vx: (to.x - from.x) / d * speed,
            vy: (to.y - from.y) / d * speed,
        }
    }

    pub fn speed(&self) -> f64 {
        libm::hypot(self.vx, self.vy)
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0
    }

    pub fn heading(&self) -> Option<f64> {
        (!self.is_zero()).then(|| libm::atan2(self.vy, self.vx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub walk_speed: f64,
    pub dwell_s: f64,
    pub lag_gap: f64,
    pub target_gap: f64,
    pub follow_gain: f64,
}

/// Progress of a leader through its route of boards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteProgress {
    stops: Vec<usize>,
    index: usize,
    dwell_ticks: u64,
    completed_at: Option<u64>,
}

/// What happened during a [`RouteProgress::update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteEvent {
    None,
    Arrived(usize),
    Advanced(usize),
    Completed,
}

impl RouteProgress {
    pub fn new(stops: Vec<usize>) -> Self {
        Self {
            stops,
            index: 0,
            dwell_ticks: 0,
            completed_at: None,
        }
    }

    /// Board index of the current stop, `None` once the route is done.
    pub fn current(&self) -> Option<usize> {
        self.stops.get(self.index).copied()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dwell_ticks(&self) -> u64 {
        self.dwell_ticks
    }

    pub fn is_complete(&self) -> bool {
        self.index >= self.stops.len()
    }

    pub fn completed_at(&self) -> Option<u64> {
        self.completed_at
    }

    /// Counts consecutive ticks inside the current board's visit radius and
    /// advances once `dwell_ticks` of them have accumulated.
    pub fn update(
        &mut self,
        position: Point2,
        boards: &[Board],
        dwell_ticks: u64,
        tick: u64,
    ) -> RouteEvent {
        let Some(stop) = self.current() else {
            return RouteEvent::None;
        };
        let board = &boards[stop];
        if distance(position, board.position()) > board.visit_radius {
            self.dwell_ticks = 0;
            return RouteEvent::None;
        }
        self.dwell_ticks += 1;
        if self.dwell_ticks < dwell_ticks {
            return if self.dwell_ticks == 1 {
                RouteEvent::Arrived(stop)
            } else {
                RouteEvent::None
            };
        }
        self.index += 1;
        self.dwell_ticks = 0;
        if self.is_complete() {
            self.completed_at = Some(tick);
            RouteEvent::Completed
        } else {
            RouteEvent::Advanced(stop)
        }
    }
}

/// Seeks the current board at walking speed and stands still once inside
/// its visit radius. With `partner_distance` available (augmented
/// condition only) the leader waits whenever the partner lags beyond
/// `lag_gap`.
pub fn leader_policy(
    position: Point2,
    waypoint: Option<&Board>,
    partner_distance: Option<f64>,
    params: &PolicyParams,
) -> Velocity {
    let Some(board) = waypoint else {
        return Velocity::ZERO;
    };
    if distance(position, board.position()) <= board.visit_radius {
        return Velocity::ZERO;
    }
    if partner_distance.is_some_and(|d| d > params.lag_gap) {
        return Velocity::ZERO;
    }
    Velocity::toward(position, board.position(), params.walk_speed)
}

/// Point `target_gap` behind the leader along the leader's heading.
pub fn follow_point(leader: &Pose2D, target_gap: f64) -> Point2 {
    leader.position().offset(leader.heading, -target_gap)
}

/// Pure pursuit of [`follow_point`], speed proportional to the remaining
/// gap and capped at walking speed.
pub fn follower_policy(follower: Point2, leader: &Pose2D, params: &PolicyParams) -> Velocity {
    let target = follow_point(leader, params.target_gap);
    let gap = distance(follower, target);
    if gap < FOLLOW_DEADBAND_M {
        return Velocity::ZERO;
    }
    let speed = (params.follow_gain * gap).min(params.walk_speed);
    Velocity::toward(follower, target, speed)
}

/// Tolerances used when turning a desired velocity into WASD keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyDriver {
    /// Turn keys engage above this heading error.
    pub turn_threshold: f64,
    /// Forward key allowed below this heading error.
    pub drive_cone: f64,
    /// Minimum commanded speed worth driving for.
    pub min_speed: f64,
}

impl Default for KeyDriver {
    fn default() -> Self {
        Self {
            turn_threshold: 8f64.to_radians(),
            drive_cone: 40f64.to_radians(),
            min_speed: 0.15,
        }
    }
}

impl KeyDriver {
    /// Bang-bang key state approximating `velocity` for a robot at `pose`.
    /// When the velocity is negligible and `face` is given, the robot turns
    /// in place toward that point instead.
    pub fn keys(&self, pose: &Pose2D, velocity: Velocity, face: Option<Point2>) -> DriveCommand {
        let moving = velocity.speed() >= self.min_speed;
        let desired = match (moving, velocity.heading(), face) {
            (true, Some(h), _) => h,
            (false, _, Some(p)) if distance(pose.position(), p) > 1e-6 => {
                libm::atan2(p.y - pose.y, p.x - pose.x)
            }
            _ => return DriveCommand::IDLE,
        };
        let error = normalize_angle(desired - pose.heading);
        let threshold = if moving {
            self.turn_threshold
        } else {
            // wider band when only facing, to avoid hunting
            2.0 * self.turn_threshold
        };
        let turn = if error.abs() > threshold {
            if error > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        };
        let forward = i8::from(moving && error.abs() < self.drive_cone);
        DriveCommand::new(forward, turn)
    }
}
