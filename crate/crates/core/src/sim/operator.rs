//! Scripted remote operator. It sees the local site only through the
//! telemetry and events it receives and drives the robot by sending
//! control envelopes, the same way a person at the console would.

use crate::awareness::{IndicatorMode, PartnerIndicator};
use crate::config::SimConfig;
use crate::geometry::{distance, in_fov, screen_to_azimuth, CameraModel, Point2, Pose2D};
use crate::kinematics::DriveCommand;
use crate::protocol::{Channel, Click, DriveKeys, Envelope, Payload, SeqCounter, TrackedEntity};
use crate::sim::policy::{
    follow_point, follower_policy, leader_policy, KeyDriver, PolicyParams, Velocity,
};
use crate::sim::scenario::{Board, Condition, LeaderSide, Scenario};

pub const OPERATOR_SENDER: &str = "operator";

/// Key state is re-sent at this interval even without changes, so a lost
/// release does not leave the robot driving forever.
const KEY_REFRESH_MS: u64 = 500;
/// Extra dwell the operator adds on top of the nominal dwell time.
const DWELL_MARGIN_MS: u64 = 500;
/// How far inside a board's visit radius the operator parks the robot.
const STOP_MARGIN_M: f64 = 0.1;
/// A stale pursuit target counts as reached within this radius.
const STALE_REACHED_M: f64 = 0.3;

/// Last known estimate of the partner, with where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PartnerFix {
    pose: Pose2D,
    /// True when the estimate is current rather than remembered.
    live: bool,
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    condition: Condition,
    leader: LeaderSide,
    boards: Vec<Board>,
    stops: Vec<usize>,
    params: PolicyParams,
    dwell_ms: u64,
    cam: CameraModel,
    driver: KeyDriver,
    seq: SeqCounter,
    robot: Option<Pose2D>,
    partner_tracker: Option<Pose2D>,
    indicator: Option<PartnerIndicator>,
    fix: Option<PartnerFix>,
    stop_index: usize,
    arrived_at: Option<u64>,
    clicked_stop: Option<usize>,
    sent_keys: Option<DriveKeys>,
    last_send_ms: u64,
}

impl ScriptedOperator {
    pub fn new(scenario: &Scenario, config: &SimConfig, walk_speed: f64) -> Self {
        Self {
            condition: scenario.condition(),
            leader: scenario.leader(),
            boards: scenario.boards.clone(),
            stops: scenario.route_indices(),
            params: PolicyParams {
                walk_speed,
                dwell_s: config.dwell_s,
                lag_gap: config.lag_gap_m,
                target_gap: config.target_gap_m,
                follow_gain: config.follow_gain,
            },
            dwell_ms: (config.dwell_s * 1000.0).round() as u64,
            cam: config.camera(),
            driver: KeyDriver::default(),
            seq: SeqCounter::new(),
            robot: None,
            partner_tracker: None,
            indicator: None,
            fix: None,
            stop_index: 0,
            arrived_at: None,
            clicked_stop: None,
            sent_keys: None,
            last_send_ms: 0,
        }
    }

    /// Absorbs one telemetry or event envelope from the site.
    pub fn observe(&mut self, e: &Envelope) {
        match e.payload {
            Payload::TrackerPose(p) => {
                let pose = Pose2D::new(p.x, p.y, p.heading);
                match p.entity {
                    TrackedEntity::Robot => self.robot = Some(pose),
                    TrackedEntity::Partner => self.partner_tracker = Some(pose),
                }
            }
            Payload::RobotStatus(s) => {
                self.cam = self.cam.with_pan_tilt(s.pan, s.tilt);
            }
            Payload::IndicatorState(s) if self.condition.augmented() => {
                self.indicator = Some(s.into());
            }
            _ => {}
        }
    }

    /// Partner position recovered from the overlay: bearing from the icon's
    /// image column (in view) or the arrow (out of view), plus distance.
    fn partner_from_indicator(&self, robot: &Pose2D, ind: &PartnerIndicator) -> Option<Point2> {
        let azimuth = match ind.mode {
            IndicatorMode::InView { u, .. } => screen_to_azimuth(&self.cam, robot, u).ok()?,
            IndicatorMode::OutOfView { arrow_bearing, .. } => {
                robot.heading + self.cam.pan + arrow_bearing
            }
        };
        Some(robot.position().offset(azimuth, ind.distance))
    }

    fn refresh_fix(&mut self, robot: &Pose2D) {
        if let Some(fix) = self.fix.as_mut() {
            fix.live = false;
        }
        let Some(tracked) = self.partner_tracker else {
            return;
        };
        if self.condition.augmented() {
            if let Some(p) = self
                .indicator
                .and_then(|ind| self.partner_from_indicator(robot, &ind))
            {
                self.fix = Some(PartnerFix {
                    pose: Pose2D::new(p.x, p.y, tracked.heading),
                    live: true,
                });
            }
        } else if in_fov(&self.cam, robot, tracked.position()).unwrap_or(false) {
            // plain video: the partner is only known while on camera
            self.fix = Some(PartnerFix {
                pose: tracked,
                live: true,
            });
        }
    }

    fn follower_keys(&mut self, robot: &Pose2D) -> DriveCommand {
        self.refresh_fix(robot);
        let Some(fix) = self.fix else {
            // never seen: look around
            return DriveCommand::new(0, 1);
        };
        let target = follow_point(&fix.pose, self.params.target_gap);
        let velocity = follower_policy(robot.position(), &fix.pose, &self.params);
        let mut cmd = self.driver.keys(robot, velocity, Some(fix.pose.position()));
        if !fix.live && distance(robot.position(), target) < STALE_REACHED_M {
            // reached the remembered spot without reacquiring: search toward
            // where the partner was heading
            let ahead = fix.pose.position().offset(fix.pose.heading, 1.0);
            let bearing = libm::atan2(ahead.y - robot.y, ahead.x - robot.x) - robot.heading;
            let turn = if crate::geometry::normalize_angle(bearing) >= 0.0 {
                1
            } else {
                -1
            };
            cmd = DriveCommand::new(0, turn);
        }
        cmd
    }

    fn leader_keys(
        &mut self,
        robot: &Pose2D,
        now_ms: u64,
        out: &mut Vec<Envelope>,
    ) -> DriveCommand {
        let Some(&stop) = self.stops.get(self.stop_index) else {
            return DriveCommand::IDLE;
        };
        let board = &self.boards[stop];
        let inside =
            distance(robot.position(), board.position()) <= board.visit_radius - STOP_MARGIN_M;
        if inside {
            let since = *self.arrived_at.get_or_insert(now_ms);
            if now_ms - since >= self.dwell_ms + DWELL_MARGIN_MS {
                self.stop_index += 1;
                self.arrived_at = None;
            }
            return DriveCommand::IDLE;
        }
        self.arrived_at = None;
        let partner_distance = if self.condition.augmented() {
            self.indicator.map(|i| i.distance)
        } else {
            None
        };
        // the operator aims deeper than the visit radius, so the policy's own
        // arrival test is shrunk to match
        let aim = Board {
            visit_radius: board.visit_radius - STOP_MARGIN_M,
            ..board.clone()
        };
        let velocity = leader_policy(robot.position(), Some(&aim), partner_distance, &self.params);
        let velocity = if velocity.is_zero() {
            velocity
        } else {
            // the robot drives at its own top speed toward the board
            Velocity::toward(robot.position(), board.position(), 1.0)
        };
        let cmd = self.driver.keys(robot, velocity, None);
        if self.condition.augmented()
            && self.clicked_stop != Some(self.stop_index)
            && cmd.turn() == 0
        {
            // show the partner where we are heading next
            self.clicked_stop = Some(self.stop_index);
            let u = self.cam.image_width / 2.0;
            let seq = self.seq.next(Channel::Ctrl);
            out.push(Envelope::new(
                OPERATOR_SENDER,
                seq,
                now_ms,
                Payload::Click(Click { u }),
            ));
        }
        cmd
    }

    /// Control envelopes to send at `now_ms`.
    pub fn act(&mut self, now_ms: u64) -> Vec<Envelope> {
        let mut out = Vec::new();
        let Some(robot) = self.robot else {
            return out;
        };
        let cmd = match self.leader {
            LeaderSide::Local => self.follower_keys(&robot),
            LeaderSide::Remote => self.leader_keys(&robot, now_ms, &mut out),
        };
        let keys = DriveKeys::for_command(cmd);
        let changed = self.sent_keys != Some(keys);
        if changed || now_ms >= self.last_send_ms + KEY_REFRESH_MS {
            self.sent_keys = Some(keys);
            self.last_send_ms = now_ms;
            let seq = self.seq.next(Channel::Ctrl);
            out.push(Envelope::new(
                OPERATOR_SENDER,
                seq,
                now_ms,
                Payload::DriveKeys(keys),
            ));
        }
        out
    }
}
