//! Shared pointing references between the two sites.
//!
//! Local pointing gestures are recognised from 2D body keypoints and shown
//! to the operator as a touch line (head through fingertip, extended to the
//! image border). Operator clicks become floor rays projected from the robot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{screen_to_azimuth, FloorRay, GeometryError, Point2};
use crate::kinematics::RobotState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SharedRefError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedRefConfig {
    pub elbow_min_deg: f64,
    pub min_confidence: f64,
    pub debounce_frames: u32,
    pub gesture_ttl_s: f64,
    pub click_ttl_s: f64,
    pub ray_extent_m: f64,
}

impl Default for SharedRefConfig {
    fn default() -> Self {
        Self {
            elbow_min_deg: 160.0,
            min_confidence: 0.5,
            debounce_frames: 5,
            gesture_ttl_s: 3.0,
            click_ttl_s: 5.0,
            ray_extent_m: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self {
            x,
            y,
            confidence: confidence.clamp(0.0, 1.0),
        }
    }

    fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmKeypoints {
    pub shoulder: Option<Keypoint>,
    pub elbow: Option<Keypoint>,
    pub wrist: Option<Keypoint>,
    pub fingertip: Option<Keypoint>,
    pub hip: Option<Keypoint>,
}

/// Image-plane body keypoints (pixels, y pointing down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub image_width: f64,
    pub image_height: f64,
    pub head: Option<Keypoint>,
    pub left: ArmKeypoints,
    pub right: ArmKeypoints,
}

impl Skeleton {
    pub fn arm(&self, side: ArmSide) -> &ArmKeypoints {
        match side {
            ArmSide::Left => &self.left,
            ArmSide::Right => &self.right,
        }
    }

    /// Applies `p -> scale * p + offset` to every keypoint and to the frame.
    pub fn transformed(&self, scale: f64, offset: Point2) -> Skeleton {
        let map = |k: Option<Keypoint>| {
            k.map(|k| Keypoint {
                x: k.x * scale + offset.x,
                y: k.y * scale + offset.y,
                confidence: k.confidence,
            })
        };
        let arm = |a: &ArmKeypoints| ArmKeypoints {
            shoulder: map(a.shoulder),
            elbow: map(a.elbow),
            wrist: map(a.wrist),
            fingertip: map(a.fingertip),
            hip: map(a.hip),
        };
        Skeleton {
            image_width: self.image_width * scale,
            image_height: self.image_height * scale,
            head: map(self.head),
            left: arm(&self.left),
            right: arm(&self.right),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingGesture {
    pub side: ArmSide,
    pub elbow_angle: f64,
    /// From the head keypoint to where the head-fingertip line leaves the image.
    pub touch_line: [Point2; 2],
}

/// Interior angle at `b` of the polyline a-b-c, in degrees.
pub fn joint_angle_deg(a: Point2, b: Point2, c: Point2) -> f64 {
    let (ux, uy) = (a.x - b.x, a.y - b.y);
    let (vx, vy) = (c.x - b.x, c.y - b.y);
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    libm::atan2(cross.abs(), dot).to_degrees()
}

/// Where the ray from `from` through `through` exits the image rectangle.
fn extend_to_border(from: Point2, through: Point2, width: f64, height: f64) -> Point2 {
    let dx = through.x - from.x;
    let dy = through.y - from.y;
    let mut t = f64::INFINITY;
    if dx > 0.0 {
        t = t.min((width - from.x) / dx);
    } else if dx < 0.0 {
        t = t.min(-from.x / dx);
    }
    if dy > 0.0 {
        t = t.min((height - from.y) / dy);
    } else if dy < 0.0 {
        t = t.min(-from.y / dy);
    }
    if !t.is_finite() || t < 1.0 {
        // origin outside the frame or degenerate direction: stop at the fingertip
        return through;
    }
    Point2::new(from.x + t * dx, from.y + t * dy)
}

/// Reports a pointing gesture on `side` when the arm is straight enough and
/// the wrist is raised above the hip. Missing or low-confidence keypoints
/// yield `None`.
pub fn detect_pointing(
    s: &Skeleton,
    side: ArmSide,
    cfg: &SharedRefConfig,
) -> Option<PointingGesture> {
    let trusted = |k: Option<Keypoint>| k.filter(|k| k.confidence >= cfg.min_confidence);
    let arm = s.arm(side);
    let head = trusted(s.head)?;
    let shoulder = trusted(arm.shoulder)?;
    let elbow = trusted(arm.elbow)?;
    let wrist = trusted(arm.wrist)?;
    let hip = trusted(arm.hip)?;
    let fingertip = match arm.fingertip {
        Some(f) => Some(trusted(Some(f))?),
        None => None,
    };

    let elbow_angle = joint_angle_deg(shoulder.point(), elbow.point(), wrist.point());
    if elbow_angle < cfg.elbow_min_deg || wrist.y >= hip.y {
        return None;
    }
    let tip = fingertip.unwrap_or(wrist).point();
    let end = extend_to_border(head.point(), tip, s.image_width, s.image_height);
    Some(PointingGesture {
        side,
        elbow_angle,
        touch_line: [head.point(), end],
    })
}

/// Either arm; the straighter one wins.
pub fn detect_any_pointing(s: &Skeleton, cfg: &SharedRefConfig) -> Option<PointingGesture> {
    let left = detect_pointing(s, ArmSide::Left, cfg);
    let right = detect_pointing(s, ArmSide::Right, cfg);
    match (left, right) {
        (Some(l), Some(r)) => Some(if r.elbow_angle > l.elbow_angle { r } else { l }),
        (l, r) => l.or(r),
    }
}

/// Requires `frames` consecutive detections before a gesture is shown, then
/// keeps it visible for `ttl_s` after the last detection.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureDebouncer {
    frames: u32,
    ttl_s: f64,
    fps: f64,
    frame_index: u64,
    streak: u32,
    active: Option<(PointingGesture, f64)>,
}

/// Result of pushing one frame into a [`GestureDebouncer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebounceOutput {
    /// Set on the frame where a gesture first becomes (or becomes again) stable.
    pub newly_emitted: bool,
    pub active: Option<PointingGesture>,
}

impl GestureDebouncer {
    pub fn new(frames: u32, ttl_s: f64, fps: f64) -> Self {
        assert!(fps > 0.0, "fps must be positive");
        Self {
            frames: frames.max(1),
            ttl_s,
            fps,
            frame_index: 0,
            streak: 0,
            active: None,
        }
    }

    pub fn from_config(cfg: &SharedRefConfig, fps: f64) -> Self {
        Self::new(cfg.debounce_frames, cfg.gesture_ttl_s, fps)
    }

    /// Timestamp of the next frame to be pushed.
    pub fn now(&self) -> f64 {
        self.frame_index as f64 / self.fps
    }

    pub fn push(&mut self, detection: Option<PointingGesture>) -> DebounceOutput {
        let t = self.now();
        self.frame_index += 1;
        let mut newly_emitted = false;
        match detection {
            Some(g) => {
                self.streak = self.streak.saturating_add(1);
                if self.streak >= self.frames {
                    newly_emitted = self.streak == self.frames;
                    self.active = Some((g, t));
                } else if let Some((_, last)) = self.active {
                    if t - last > self.ttl_s {
                        self.active = None;
                    }
                }
            }
            None => {
                self.streak = 0;
                if let Some((_, last)) = self.active {
                    if t - last > self.ttl_s {
                        self.active = None;
                    }
                }
            }
        }
        DebounceOutput {
            newly_emitted,
            active: self.active_at(t),
        }
    }

    /// The stable gesture visible at time `t`, if any.
    pub fn active_at(&self, t: f64) -> Option<PointingGesture> {
        self.active
            .filter(|&(_, last)| t - last <= self.ttl_s)
            .map(|(g, _)| g)
    }

    /// Consecutive detected frames so far.
    pub fn streak(&self) -> u32 {
        self.streak
    }

    /// Time of the last detection that kept the active gesture alive.
    pub fn last_detection(&self) -> Option<f64> {
        self.active.map(|(_, t)| t)
    }
}

/// Runs a whole frame stream through a fresh debouncer and returns the
/// gesture still visible after the last frame.
pub fn debounce_gesture(
    frames: &[Option<PointingGesture>],
    fps: f64,
    cfg: &SharedRefConfig,
) -> Option<PointingGesture> {
    let mut d = GestureDebouncer::from_config(cfg, fps);
    let mut last = None;
    for f in frames {
        last = d.push(*f).active;
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    LocalGesture,
    RemoteClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingReference {
    pub source: ReferenceSource,
    pub ray: FloorRay,
    pub created_at: f64,
    pub display_ttl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touch_line: Option<[Point2; 2]>,
}

impl PointingReference {
    pub fn expires_at(&self) -> f64 {
        self.created_at + self.display_ttl
    }

    pub fn is_active(&self, now: f64) -> bool {
        now <= self.expires_at()
    }
}

/// Operator click at image column `u` turned into a floor ray from the robot
/// base. The projector shares the camera's optical centre, so the ray
/// azimuth is the click azimuth.
pub fn click_to_floor_ray(
    robot: &RobotState,
    u: f64,
    cfg: &SharedRefConfig,
) -> Result<FloorRay, SharedRefError> {
    let azimuth = screen_to_azimuth(&robot.cam, &robot.pose, u)?;
    Ok(FloorRay::new(
        robot.pose.position(),
        azimuth,
        cfg.ray_extent_m,
        cfg.click_ttl_s,
    ))
}

/// At most one live reference per source; a newer one replaces the older.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceRegistry {
    local_gesture: Option<PointingReference>,
    remote_click: Option<PointingReference>,
}

impl ReferenceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&mut self, source: ReferenceSource) -> &mut Option<PointingReference> {
        match source {
            ReferenceSource::LocalGesture => &mut self.local_gesture,
            ReferenceSource::RemoteClick => &mut self.remote_click,
        }
    }

    pub fn place(&mut self, reference: PointingReference) {
        *self.slot(reference.source) = Some(reference);
    }

    pub fn place_click(
        &mut self,
        robot: &RobotState,
        u: f64,
        now: f64,
        cfg: &SharedRefConfig,
    ) -> Result<PointingReference, SharedRefError> {
        let ray = click_to_floor_ray(robot, u, cfg)?;
        let reference = PointingReference {
            source: ReferenceSource::RemoteClick,
            ray,
            created_at: now,
            display_ttl: cfg.click_ttl_s,
            touch_line: None,
        };
        self.place(reference);
        Ok(reference)
    }

    pub fn get(&self, source: ReferenceSource) -> Option<&PointingReference> {
        match source {
            ReferenceSource::LocalGesture => self.local_gesture.as_ref(),
            ReferenceSource::RemoteClick => self.remote_click.as_ref(),
        }
    }

    /// Drops expired references and refreshes the remaining ray TTLs.
    pub fn expire(&mut self, now: f64) {
        for slot in [&mut self.local_gesture, &mut self.remote_click] {
            match slot {
                Some(r) if r.is_active(now) => r.ray.ttl = r.expires_at() - now,
                _ => *slot = None,
            }
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &PointingReference> {
        self.local_gesture.iter().chain(self.remote_click.iter())
    }

    pub fn len(&self) -> usize {
        self.active().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
