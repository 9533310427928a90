//! Fixed-timestep world: arena, robot, scripted local visitor, awareness
//! state and shared references. The world owns all mutable state and only
//! talks to the outside through envelopes passed into and out of [`World::tick`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::awareness::{compute_indicator, MovementTracker, PartnerIndicator};
use crate::config::SimConfig;
use crate::geometry::{distance, in_fov, relative_bearing, FloorRay, Point2, Pose2D};
use crate::kinematics::{
    apply_tap, set_pan_tilt, step_drive, KinematicsConfig, RobotState, TapEvent, TapSide,
};
use crate::protocol::{
    Channel, DriveKeys, Envelope, GestureRef, IndicatorState, Payload, RobotStatus, SeqCounter,
    SequenceTracker, SessionAction, SessionCtl, Tap, TrackedEntity, TrackerPose,
};
use crate::sharedref::{
    detect_any_pointing, GestureDebouncer, PointingReference, ReferenceRegistry, ReferenceSource,
    SharedRefConfig,
};
use crate::sim::policy::{
    follower_policy, leader_policy, PolicyParams, RouteEvent, RouteProgress, Velocity,
};
use crate::sim::scenario::{Condition, LeaderSide, Scenario, ScenarioError};
use crate::sim::skeleton::synth_skeleton;

/// Simulation step, milliseconds.
pub const TICK_MS: u64 = 20;
/// Simulation step, seconds.
pub const DT: f64 = TICK_MS as f64 / 1000.0;
/// Sender name the world uses on outbound envelopes.
pub const WORLD_SENDER: &str = "site";

/// The scripted local visitor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalAgent {
    pub pose: Pose2D,
    pub walk_speed: f64,
    pub speed: f64,
    /// Earliest time the visitor may tap the robot again.
    pub next_tap_s: f64,
}

/// Per-tick positions, used for metrics and replay checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub robot: Pose2D,
    pub local: Pose2D,
}

#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    config: SimConfig,
    kin: KinematicsConfig,
    refcfg: SharedRefConfig,
    params: PolicyParams,
    tick: u64,
    robot: RobotState,
    keys: DriveKeys,
    local: LocalAgent,
    route: RouteProgress,
    movement: MovementTracker,
    indicator: Option<PartnerIndicator>,
    refs: ReferenceRegistry,
    debouncer: GestureDebouncer,
    out_seq: SeqCounter,
    in_seq: SequenceTracker,
    reordered: u64,
    echo_ms: u64,
    rng: ChaCha8Rng,
    finished: bool,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    tick: u64,
    robot: &'a RobotState,
    keys: &'a DriveKeys,
    local: &'a LocalAgent,
    route: &'a RouteProgress,
    movement: Vec<(f64, f64)>,
    movement_state: crate::awareness::MovementState,
    indicator: &'a Option<PartnerIndicator>,
    refs: &'a ReferenceRegistry,
    gesture_last: Option<f64>,
    gesture_streak: u32,
    out_seq: &'a SeqCounter,
    in_seq: Vec<(String, Channel, u64)>,
    reordered: u64,
    echo_ms: u64,
    rng_word_pos: String,
    finished: bool,
}

impl World {
    pub fn new(scenario: Scenario, config: SimConfig) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        config
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let mut jitter = |r: f64| rng.random_range(-r..=r);

        let (local_start, robot_start) = match scenario.leader() {
            LeaderSide::Local => (scenario.start.leader.pose(), scenario.start.follower.pose()),
            LeaderSide::Remote => (scenario.start.follower.pose(), scenario.start.leader.pose()),
        };
        let shift = (jitter(0.25), jitter(0.25));
        let walk_speed = config.walk_speed_mps + jitter(config.walk_speed_jitter_mps);
        let arena = &scenario.arena;
        let local_pose = arena.clamp_pose(Pose2D::new(
            local_start.x + shift.0,
            local_start.y + shift.1,
            local_start.heading,
        ));
        let robot_pose = arena.clamp_pose(Pose2D::new(
            robot_start.x + shift.0,
            robot_start.y + shift.1,
            robot_start.heading,
        ));

        let params = PolicyParams {
            walk_speed,
            dwell_s: config.dwell_s,
            lag_gap: config.lag_gap_m,
            target_gap: config.target_gap_m,
            follow_gain: config.follow_gain,
        };
        let fps = 1000.0 / TICK_MS as f64;
        Ok(Self {
            kin: config.kinematics(),
            refcfg: config.sharedref(),
            params,
            tick: 0,
            robot: RobotState::new(robot_pose, config.camera()),
            keys: DriveKeys::default(),
            local: LocalAgent {
                pose: local_pose,
                walk_speed,
                speed: 0.0,
                next_tap_s: 0.0,
            },
            route: RouteProgress::new(scenario.route_indices()),
            movement: MovementTracker::new(),
            indicator: None,
            refs: ReferenceRegistry::new(),
            debouncer: GestureDebouncer::from_config(&config.sharedref(), fps),
            out_seq: SeqCounter::new(),
            in_seq: SequenceTracker::new(),
            reordered: 0,
            echo_ms: 0,
            rng,
            finished: false,
            scenario,
            config,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn condition(&self) -> Condition {
        self.scenario.condition()
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn sim_time_ms(&self) -> u64 {
        self.tick * TICK_MS
    }

    pub fn time_s(&self) -> f64 {
        self.tick as f64 * DT
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn local(&self) -> &LocalAgent {
        &self.local
    }

    pub fn indicator(&self) -> Option<&PartnerIndicator> {
        self.indicator.as_ref()
    }

    pub fn references(&self) -> &ReferenceRegistry {
        &self.refs
    }

    pub fn route(&self) -> &RouteProgress {
        &self.route
    }

    pub fn policy_params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn reordered_count(&self) -> u64 {
        self.reordered
    }

    /// Route finished: every content board has been visited by the leader.
    pub fn is_complete(&self) -> bool {
        self.route.is_complete()
    }

    pub fn record(&self) -> TickRecord {
        TickRecord {
            tick: self.tick,
            robot: self.robot.pose,
            local: self.local.pose,
        }
    }

    /// SHA-256 over every piece of mutable state, hex encoded.
    pub fn state_hash(&self) -> String {
        let snapshot = Snapshot {
            tick: self.tick,
            robot: &self.robot,
            keys: &self.keys,
            local: &self.local,
            route: &self.route,
            movement: self.movement.samples().copied().collect(),
            movement_state: self.movement.state(),
            indicator: &self.indicator,
            refs: &self.refs,
            gesture_last: self.debouncer.last_detection(),
            gesture_streak: self.debouncer.streak(),
            out_seq: &self.out_seq,
            in_seq: self
                .in_seq
                .entries()
                .map(|((s, c), q)| (s.clone(), *c, *q))
                .collect(),
            reordered: self.reordered,
            echo_ms: self.echo_ms,
            rng_word_pos: self.rng.get_word_pos().to_string(),
            finished: self.finished,
        };
        let bytes = serde_json::to_vec(&snapshot).expect("snapshot serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn envelope(&mut self, payload: Payload) -> Envelope {
        let seq = self.out_seq.next(payload.channel());
        Envelope::new(WORLD_SENDER, seq, self.sim_time_ms(), payload)
    }

    fn apply_inbound(&mut self, e: &Envelope, out: &mut Vec<Envelope>) {
        if e.channel != Channel::Ctrl {
            return;
        }
        if self.in_seq.observe(e) {
            self.reordered += 1;
        }
        self.echo_ms = self.echo_ms.max(e.sim_time);
        let augmented = self.condition().augmented();
        match e.payload {
            Payload::DriveKeys(keys) => self.keys = keys,
            Payload::PanTilt(pt) if augmented => {
                self.robot = set_pan_tilt(&self.robot, pt.pan, pt.tilt);
            }
            Payload::Click(click) if augmented => {
                let now = self.time_s();
                if let Ok(reference) =
                    self.refs
                        .place_click(&self.robot, click.u, now, &self.refcfg)
                {
                    let payload = Payload::GestureRef(GestureRef::from(&reference));
                    let env = self.envelope(payload);
                    out.push(env);
                }
            }
            _ => {}
        }
    }

    fn local_is_leader(&self) -> bool {
        self.scenario.leader() == LeaderSide::Local
    }

    fn current_board_position(&self) -> Option<Point2> {
        self.route
            .current()
            .map(|i| self.scenario.boards[i].position())
    }

    /// The local leader taps the robot's shoulder while explaining a board
    /// if the robot is close by but not looking at them.
    fn maybe_tap(&mut self, out: &mut Vec<Envelope>) {
        let now = self.time_s();
        if !self.local_is_leader()
            || self.route.dwell_ticks() == 0
            || self.robot.is_rotating()
            || now < self.local.next_tap_s
        {
            return;
        }
        let p = self.local.pose.position();
        if distance(self.robot.pose.position(), p) > self.config.tap_reach_m {
            return;
        }
        if in_fov(&self.robot.cam, &self.robot.pose, p).unwrap_or(true) {
            return;
        }
        let Ok(bearing) = relative_bearing(&self.robot.pose, p) else {
            return;
        };
        let side = if bearing > 0.0 {
            TapSide::Left
        } else {
            TapSide::Right
        };
        let tap = TapEvent {
            side,
            timestamp: now,
        };
        self.robot = apply_tap(&self.robot, tap, &self.kin);
        self.local.next_tap_s = now + self.config.tap_cooldown_s;
        let env = self.envelope(Payload::Tap(Tap {
            side,
            timestamp: now,
        }));
        out.push(env);
    }

    fn local_velocity(&self) -> Velocity {
        let pos = self.local.pose.position();
        if self.local_is_leader() {
            let waypoint = self.route.current().map(|i| &self.scenario.boards[i]);
            let partner_distance = if self.condition().augmented() {
                self.indicator.map(|i| i.distance)
            } else {
                None
            };
            leader_policy(pos, waypoint, partner_distance, &self.params)
        } else {
            follower_policy(pos, &self.robot.pose, &self.params)
        }
    }

    fn step_local(&mut self) {
        let v = self.local_velocity();
        let before = self.local.pose.position();
        let heading = v.heading().unwrap_or(self.local.pose.heading);
        let moved = Pose2D::new(before.x + v.vx * DT, before.y + v.vy * DT, heading);
        self.local.pose = self.scenario.arena.clamp_pose(moved);
        self.local.speed = distance(before, self.local.pose.position()) / DT;
    }

    fn update_gestures(&mut self, out: &mut Vec<Envelope>) {
        let pointing_ticks = (self.config.point_s / DT).round() as u64;
        let target = if self.local_is_leader()
            && self.route.dwell_ticks() > 0
            && self.route.dwell_ticks() <= pointing_ticks
        {
            self.current_board_position()
        } else {
            None
        };
        let noise = self.config.skeleton_noise_px;
        let skeleton = synth_skeleton(&self.local.pose, target, &self.robot, noise, &mut self.rng);
        let detection = skeleton.and_then(|s| detect_any_pointing(&s, &self.refcfg));
        let now = self.debouncer.now();
        let result = self.debouncer.push(detection);
        let Some(gesture) = result.active else {
            return;
        };
        let Some(last) = self.debouncer.last_detection() else {
            return;
        };
        if detection.is_none() && !result.newly_emitted {
            return;
        }
        let origin = self.local.pose.position();
        let (azimuth, extent) = match target {
            Some(t) if distance(origin, t) > 1e-6 => (
                libm::atan2(t.y - origin.y, t.x - origin.x),
                distance(origin, t),
            ),
            _ => (self.local.pose.heading, self.refcfg.ray_extent_m),
        };
        let reference = PointingReference {
            source: ReferenceSource::LocalGesture,
            ray: FloorRay::new(origin, azimuth, extent, self.refcfg.gesture_ttl_s),
            created_at: last,
            display_ttl: self.refcfg.gesture_ttl_s,
            touch_line: Some(gesture.touch_line),
        };
        self.refs.place(reference);
        if result.newly_emitted {
            let env = self.envelope(Payload::GestureRef(GestureRef::from(&reference)));
            out.push(env);
        }
        debug_assert!((now - last).abs() < 1e-9);
    }

    fn telemetry_due(&self) -> bool {
        // a new telemetry period starts within this tick
        let period = 1000.0 / self.config.telemetry_hz;
        let now = self.sim_time_ms() as f64;
        let prev = now - TICK_MS as f64;
        (now / period).floor() > (prev / period).floor() || self.tick == 1
    }

    fn emit_telemetry(&mut self, out: &mut Vec<Envelope>) {
        let r = self.robot.pose;
        let l = self.local.pose;
        let robot = self.envelope(Payload::TrackerPose(TrackerPose {
            entity: TrackedEntity::Robot,
            x: r.x,
            y: r.y,
            heading: r.heading,
        }));
        let partner = self.envelope(Payload::TrackerPose(TrackerPose {
            entity: TrackedEntity::Partner,
            x: l.x,
            y: l.y,
            heading: l.heading,
        }));
        let status = self.envelope(Payload::RobotStatus(RobotStatus {
            pan: self.robot.cam.pan,
            tilt: self.robot.cam.tilt,
            rotating: self.robot.is_rotating(),
            echo_ms: self.echo_ms,
        }));
        out.extend([robot, partner, status]);
        if let Some(ind) = self.indicator {
            let env = self.envelope(Payload::IndicatorState(IndicatorState::from(ind)));
            out.push(env);
        }
    }

    /// Advances the world by one 20 ms step. `inbound` holds the control
    /// messages delivered at this tick boundary, applied in order.
    pub fn tick(&mut self, inbound: &[Envelope]) -> Vec<Envelope> {
        let mut out = Vec::new();
        if self.tick == 0 {
            let env = self.envelope(Payload::SessionCtl(SessionCtl {
                action: SessionAction::Start,
            }));
            out.push(env);
        }
        for e in inbound {
            self.apply_inbound(e, &mut out);
        }
        let augmented = self.condition().augmented();
        if augmented {
            self.maybe_tap(&mut out);
        }

        let cmd = self.keys.command();
        let stepped = step_drive(&self.robot, cmd, DT, &self.kin);
        self.robot = RobotState {
            pose: self.scenario.arena.clamp_pose(stepped.pose),
            ..stepped
        };
        self.step_local();

        let leader_pos = if self.local_is_leader() {
            self.local.pose.position()
        } else {
            self.robot.pose.position()
        };
        let dwell_ticks = (self.params.dwell_s / DT).round() as u64;
        let event = self.route.update(
            leader_pos,
            &self.scenario.boards,
            dwell_ticks,
            self.tick + 1,
        );

        let t_end = (self.tick + 1) as f64 * DT;
        self.movement
            .push(self.local.speed, t_end, &self.config.awareness());
        self.indicator = if augmented {
            compute_indicator(
                &self.robot,
                self.local.pose.position(),
                self.movement.state(),
            )
            .ok()
        } else {
            None
        };
        if augmented {
            self.update_gestures(&mut out);
        }
        self.refs.expire(t_end);

        self.tick += 1;
        if self.telemetry_due() {
            self.emit_telemetry(&mut out);
        }
        if event == RouteEvent::Completed && !self.finished {
            self.finished = true;
            let env = self.envelope(Payload::SessionCtl(SessionCtl {
                action: SessionAction::Complete,
            }));
            out.push(env);
        }
        out
    }

    /// Marks a run that hit its time cap; emits the matching session event.
    pub fn timeout(&mut self) -> Envelope {
        self.finished = true;
        self.envelope(Payload::SessionCtl(SessionCtl {
            action: SessionAction::Timeout,
        }))
    }
}
