use std::f64::consts::PI;

use awaresim_core::awareness::*;
use awaresim_core::geometry::{in_fov, normalize_angle, CameraModel, Point2, Pose2D};
use awaresim_core::kinematics::*;
use proptest::prelude::*;

fn converge(start: RobotState, cfg: &KinematicsConfig) -> (RobotState, usize) {
    let mut s = start;
    let mut steps = 0;
    while s.is_rotating() && steps < 1000 {
        s = step_drive(&s, DriveCommand::new(1, 1), 0.02, cfg);
        steps += 1;
    }
    (s, steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5_000))]

    #[test]
    fn tap_turns_by_tap_angle(h in -PI..PI, left in any::<bool>(), angle_deg in 10.0..180.0f64) {
        let cfg = KinematicsConfig { tap_angle: angle_deg.to_radians(), ..KinematicsConfig::default() };
        let side = if left { TapSide::Left } else { TapSide::Right };
        let s0 = RobotState::new(Pose2D::new(0.0, 0.0, h), CameraModel::default());
        let tapped = apply_tap(&s0, TapEvent { side, timestamp: 0.0 }, &cfg);
        prop_assert!(tapped.is_rotating());
        prop_assert_eq!(apply_tap(&tapped, TapEvent { side: TapSide::Left, timestamp: 0.1 }, &cfg), tapped);
        let (done, steps) = converge(tapped, &cfg);
        prop_assert!(!done.is_rotating());
        // at omega_max the turn takes angle / (omega_max * dt) steps, rounded up
        let expected_steps = (cfg.tap_angle / (cfg.omega_max * 0.02) - 1e-9).ceil() as usize;
        prop_assert!(steps <= expected_steps.max(1));
        let turned = normalize_angle(done.pose.heading - h);
        prop_assert!((normalize_angle(turned - side.sign() * cfg.tap_angle)).abs() < 1f64.to_radians());
    }

    #[test]
    fn rotation_never_overshoots(h in -PI..PI, left in any::<bool>()) {
        let cfg = KinematicsConfig::default();
        let side = if left { TapSide::Left } else { TapSide::Right };
        let s0 = RobotState::new(Pose2D::new(0.0, 0.0, h), CameraModel::default());
        let mut s = apply_tap(&s0, TapEvent { side, timestamp: 0.0 }, &cfg);
        let goal = s.rotation_goal.unwrap();
        let mut prev = normalize_angle(goal - s.pose.heading).abs();
        while s.is_rotating() {
            s = step_drive(&s, DriveCommand::IDLE, 0.02, &cfg);
            let err = normalize_angle(goal - s.pose.heading).abs();
            prop_assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    #[test]
    fn drive_step_is_unicycle(h in -PI..PI, fwd in -1i8..=1, turn in -1i8..=1) {
        let cfg = KinematicsConfig::default();
        let s0 = RobotState::new(Pose2D::new(2.0, 3.0, h), CameraModel::default());
        let s1 = step_drive(&s0, DriveCommand::new(fwd, turn), 0.02, &cfg);
        let moved = ((s1.pose.x - 2.0).powi(2) + (s1.pose.y - 3.0).powi(2)).sqrt();
        prop_assert!((moved - f64::from(fwd).abs() * cfg.v_max * 0.02).abs() < 1e-12);
        let dh = normalize_angle(s1.pose.heading - h);
        prop_assert!((dh - f64::from(turn) * cfg.omega_max * 0.02).abs() < 1e-12);
        prop_assert!(s1.pose.heading > -PI && s1.pose.heading <= PI);
    }

    #[test]
    fn indicator_agrees_with_fov(h in -PI..PI, pan in -2.9..2.9f64, az in -PI..PI, r in 0.1..12.0f64) {
        let mut robot = RobotState::new(Pose2D::new(4.0, 4.0, h), CameraModel::default());
        robot.cam = robot.cam.with_pan_tilt(pan, 0.0);
        let partner = Point2::new(4.0, 4.0).offset(az, r);
        let ind = compute_indicator(&robot, partner, MovementState::Moving).unwrap();
        prop_assert_eq!(ind.is_in_view(), in_fov(&robot.cam, &robot.pose, partner).unwrap());
        prop_assert!((ind.distance - r).abs() < 1e-9);
        match ind.mode {
            IndicatorMode::InView { u, v } => {
                prop_assert!((0.0..=robot.cam.image_width).contains(&u));
                prop_assert_eq!(v, robot.cam.head_row);
            }
            IndicatorMode::OutOfView { edge_u, arrow_bearing } => {
                prop_assert!(arrow_bearing.abs() > robot.cam.half_fov());
                let expected = if arrow_bearing > 0.0 { 0.0 } else { robot.cam.image_width };
                prop_assert_eq!(edge_u, expected);
            }
        }
    }

    #[test]
    fn movement_hysteresis(speeds in proptest::collection::vec(0.0..0.4f64, 1..60)) {
        let cfg = AwarenessConfig::default();
        let mut t = MovementTracker::new();
        let mut prev = MovementState::Stationary;
        for (i, &v) in speeds.iter().enumerate() {
            let state = t.push(v, i as f64 * 0.02, &cfg);
            let window: Vec<_> = t.samples().copied().collect();
            prop_assert_eq!(state, classify_movement(&window, prev, &cfg).unwrap());
            prev = state;
        }
    }
}

#[test]
fn empty_window_is_an_error() {
    let cfg = AwarenessConfig::default();
    assert!(classify_movement(&[], MovementState::Moving, &cfg).is_err());
}

#[test]
fn distance_label_rounds_to_decimetres() {
    let robot = RobotState::new(Pose2D::new(0.0, 0.0, 0.0), CameraModel::default());
    let ind = compute_indicator(&robot, Point2::new(1.26, 0.0), MovementState::Stationary).unwrap();
    assert_eq!(ind.distance_label(), "1.3 m");
}
