//! Synthetic 2D skeletons of the local visitor as seen by the robot's main
//! camera. They stand in for a pose estimator and feed pointing detection.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{camera_bearing, distance, in_fov, world_to_screen, Point2, Pose2D};
use crate::kinematics::RobotState;
use crate::sharedref::{ArmKeypoints, ArmSide, Keypoint, Skeleton};

/// Body proportions in meters, measured down from the head keypoint.
const SHOULDER_DROP: f64 = 0.25;
const SHOULDER_HALF_WIDTH: f64 = 0.2;
const HIP_DROP: f64 = 0.75;
const HIP_HALF_WIDTH: f64 = 0.12;
const UPPER_ARM: f64 = 0.30;
const FOREARM: f64 = 0.27;
const HAND: f64 = 0.10;
const CONFIDENCE: f64 = 0.95;

fn add(p: Point2, dx: f64, dy: f64) -> Point2 {
    Point2::new(p.x + dx, p.y + dy)
}

/// Image column the camera would see `target` at, extended beyond the frame
/// when the target is outside the field of view.
fn target_column(robot: &RobotState, target: Point2) -> Option<f64> {
    let cam = &robot.cam;
    if let Ok(Some((u, _))) = world_to_screen(cam, &robot.pose, target) {
        return Some(u);
    }
    let bearing = camera_bearing(cam, &robot.pose, target).ok()?;
    Some(if bearing > 0.0 {
        -cam.image_width
    } else {
        2.0 * cam.image_width
    })
}

/// Keypoints for `agent` as seen from the robot, or `None` when the agent
/// is outside the camera's field of view. A pointing skeleton has one arm
/// straight toward the target's image position; otherwise both elbows are
/// bent at a right angle. `noise_px` adds Gaussian jitter to every keypoint.
pub fn synth_skeleton<R: Rng + ?Sized>(
    agent: &Pose2D,
    pointing_at: Option<Point2>,
    robot: &RobotState,
    noise_px: f64,
    rng: &mut R,
) -> Option<Skeleton> {
    let cam = &robot.cam;
    if !in_fov(cam, &robot.pose, agent.position()).ok()? {
        return None;
    }
    let (u, head_row) = world_to_screen(cam, &robot.pose, agent.position()).ok()??;
    let range = distance(robot.pose.position(), agent.position());
    let s = cam.focal_px() / range;

    let head = Point2::new(u, head_row);
    // person faces the camera: their right arm is on the image left
    let shoulder_right = add(head, -SHOULDER_HALF_WIDTH * s, SHOULDER_DROP * s);
    let shoulder_left = add(head, SHOULDER_HALF_WIDTH * s, SHOULDER_DROP * s);
    let hip_right = add(head, -HIP_HALF_WIDTH * s, HIP_DROP * s);
    let hip_left = add(head, HIP_HALF_WIDTH * s, HIP_DROP * s);

    let bent = |shoulder: Point2, outward: f64| -> [Point2; 4] {
        let elbow = add(shoulder, 0.0, UPPER_ARM * s);
        let wrist = add(elbow, outward * FOREARM * s, 0.0);
        let tip = add(wrist, outward * HAND * s, 0.0);
        [shoulder, elbow, wrist, tip]
    };
    let straight = |shoulder: Point2, dir: (f64, f64)| -> [Point2; 4] {
        let along = |p: Point2, len: f64| add(p, dir.0 * len * s, dir.1 * len * s);
        let elbow = along(shoulder, UPPER_ARM);
        let wrist = along(elbow, FOREARM);
        let tip = along(wrist, HAND);
        [shoulder, elbow, wrist, tip]
    };

    let mut right = bent(shoulder_right, -1.0);
    let mut left = bent(shoulder_left, 1.0);
    if let Some(target) = pointing_at.and_then(|t| target_column(robot, t)) {
        let mut dx = target - u;
        if dx.abs() < 1.0 {
            dx = if dx < 0.0 { -1.0 } else { 1.0 };
        }
        let (side, shoulder) = if dx < 0.0 {
            (ArmSide::Right, shoulder_right)
        } else {
            (ArmSide::Left, shoulder_left)
        };
        let (ex, ey) = (target - shoulder.x, head_row - shoulder.y);
        let norm = libm::hypot(ex, ey);
        let arm = straight(shoulder, (ex / norm, ey / norm));
        match side {
            ArmSide::Right => right = arm,
            ArmSide::Left => left = arm,
        }
    }

    let normal = Normal::new(0.0, noise_px.max(0.0)).ok()?;
    let mut kp = |p: Point2| {
        let (nx, ny) = if noise_px > 0.0 {
            (normal.sample(rng), normal.sample(rng))
        } else {
            (0.0, 0.0)
        };
        Some(Keypoint::new(p.x + nx, p.y + ny, CONFIDENCE))
    };
    let head_kp = kp(head);
    let mut arm = |pts: [Point2; 4], hip: Point2| ArmKeypoints {
        shoulder: kp(pts[0]),
        elbow: kp(pts[1]),
        wrist: kp(pts[2]),
        fingertip: kp(pts[3]),
        hip: kp(hip),
    };
    let left = arm(left, hip_left);
    let right = arm(right, hip_right);
    Some(Skeleton {
        image_width: cam.image_width,
        image_height: cam.image_height,
        head: head_kp,
        left,
        right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraModel;
    use crate::sharedref::{detect_any_pointing, detect_pointing, SharedRefConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn robot() -> RobotState {
        RobotState::new(Pose2D::new(0.0, 0.0, 0.0), CameraModel::default())
    }

    #[test]
    fn out_of_view_agent_has_no_skeleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Pose2D::new(-2.0, 0.5, 0.0);
        assert!(synth_skeleton(&agent, None, &robot(), 0.0, &mut rng).is_none());
    }

    #[test]
    fn pointing_skeleton_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Pose2D::new(3.0, 0.5, 3.0);
        let s =
            synth_skeleton(&agent, Some(Point2::new(3.0, 3.0)), &robot(), 0.0, &mut rng).unwrap();
        let g = detect_any_pointing(&s, &SharedRefConfig::default()).unwrap();
        assert!((g.elbow_angle - 180.0).abs() < 1e-6);
        // target lies to the robot's left, i.e. image left
        assert_eq!(g.side, ArmSide::Right);
    }

    #[test]
    fn pointing_out_of_view_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Pose2D::new(3.0, 0.0, 3.0);
        let s = synth_skeleton(
            &agent,
            Some(Point2::new(0.0, -4.0)),
            &robot(),
            0.0,
            &mut rng,
        )
        .unwrap();
        let g = detect_pointing(&s, ArmSide::Left, &SharedRefConfig::default()).unwrap();
        assert!((g.elbow_angle - 180.0).abs() < 1e-6);
    }

    #[test]
    fn idle_skeleton_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Pose2D::new(2.0, -0.5, 0.0);
        let s = synth_skeleton(&agent, None, &robot(), 0.0, &mut rng).unwrap();
        let cfg = SharedRefConfig::default();
        assert!(detect_any_pointing(&s, &cfg).is_none());
        let a = &s.left;
        let angle = crate::sharedref::joint_angle_deg(
            Point2::new(a.shoulder.unwrap().x, a.shoulder.unwrap().y),
            Point2::new(a.elbow.unwrap().x, a.elbow.unwrap().y),
            Point2::new(a.wrist.unwrap().x, a.wrist.unwrap().y),
        );
        assert!((angle - 90.0).abs() < 1e-9);
    }

    #[test]
    fn head_anchored_at_screen_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Pose2D::new(2.0, 0.0, 0.0);
        let s = synth_skeleton(&agent, None, &robot(), 0.0, &mut rng).unwrap();
        let head = s.head.unwrap();
        assert!((head.x - 640.0).abs() < 1e-9);
        assert_eq!(head.y, 240.0);
    }
}
