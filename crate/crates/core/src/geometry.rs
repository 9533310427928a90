//! Planar geometry shared by every other module: bearings, distances,
//! field-of-view tests and the pinhole mapping between world bearings and
//! image columns.
//!
//! Transcendental functions go through `libm` so results are bit-identical
//! across platforms; replay hashes depend on it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two points closer than this are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: observer and target coincide")]
    Coincident,
    #[error("image column {u} outside [0, {width}]")]
    ColumnOutOfRange { u: f64, width: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point at `range` meters from `self` along world azimuth `azimuth`.
    pub fn offset(&self, azimuth: f64, range: f64) -> Point2 {
        Point2::new(
            self.x + range * libm::cos(azimuth),
            self.y + range * libm::sin(azimuth),
        )
    }
}

/// Planar position plus heading. Heading is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Same position, heading turned by `delta`.
    pub fn rotated(&self, delta: f64) -> Pose2D {
        Pose2D::new(self.x, self.y, self.heading + delta)
    }
}

/// Horizontal field of view, pan-tilt state and image geometry of the
/// robot's main camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub hfov: f64,
    pub pan: f64,
    pub tilt: f64,
    pub pan_min: f64,
    pub pan_max: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// Image row used as the anchor height for on-screen overlays.
    pub head_row: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        let half_pan = (343.0f64 / 2.0).to_radians();
        let half_tilt = 60.0f64.to_radians();
        Self {
            hfov: 2.0 * PI / 3.0,
            pan: 0.0,
            tilt: 0.0,
            pan_min: -half_pan,
            pan_max: half_pan,
            tilt_min: -half_tilt,
            tilt_max: half_tilt,
            image_width: 1280.0,
            image_height: 720.0,
            head_row: 240.0,
        }
    }
}

impl CameraModel {
    pub fn with_hfov(hfov: f64) -> Result<Self, GeometryError> {
        let cam = Self {
            hfov,
            ..Self::default()
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.hfov > 0.0 && self.hfov < PI) {
            return Err(GeometryError::InvalidCamera("hfov must lie in (0, π)"));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(GeometryError::InvalidCamera("image size must be positive"));
        }
        if !(self.pan_min <= self.pan_max && self.tilt_min <= self.tilt_max) {
            return Err(GeometryError::InvalidCamera("empty pan or tilt range"));
        }
        Ok(())
    }

    pub fn half_fov(&self) -> f64 {
        self.hfov / 2.0
    }

    /// Pan and tilt clamped into their mechanical ranges.
    pub fn with_pan_tilt(mut self, pan: f64, tilt: f64) -> Self {
        self.pan = pan.clamp(self.pan_min, self.pan_max);
        self.tilt = tilt.clamp(self.tilt_min, self.tilt_max);
        self
    }

    /// Focal length in pixels for the horizontal pinhole model.
    pub fn focal_px(&self) -> f64 {
        (self.image_width / 2.0) / libm::tan(self.half_fov())
    }

    /// Observer pose with the camera pan folded into its heading.
    pub fn optical_pose(&self, observer: &Pose2D) -> Pose2D {
        observer.rotated(self.pan)
    }
}

/// A direction beam drawn on the floor from the robot base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorRay {
    pub origin: Point2,
    pub azimuth: f64,
    pub extent: f64,
    /// Seconds of display time remaining.
    pub ttl: f64,
}

impl FloorRay {
    pub fn new(origin: Point2, azimuth: f64, extent: f64, ttl: f64) -> Self {
        debug_assert!(extent > 0.0);
        Self {
            origin,
            azimuth: normalize_angle(azimuth),
            extent,
            ttl,
        }
    }

    pub fn end(&self) -> Point2 {
        self.origin.offset(self.azimuth, self.extent)
    }
}

pub fn distance(a: Point2, b: Point2) -> f64 {
    libm::hypot(b.x - a.x, b.y - a.y)
}

/// Bearing of `target` as seen from `observer`: 0 straight ahead, positive
/// to the observer's left (counterclockwise).
pub fn relative_bearing(observer: &Pose2D, target: Point2) -> Result<f64, GeometryError> {
    if !(observer.position().is_finite() && target.is_finite() && observer.heading.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let dx = target.x - observer.x;
    let dy = target.y - observer.y;
    if libm::hypot(dx, dy) <= COINCIDENT_EPS {
        return Err(GeometryError::Coincident);
    }
    Ok(normalize_angle(libm::atan2(dy, dx) - observer.heading))
}

/// Bearing relative to the camera's optical axis (observer heading + pan).
pub fn camera_bearing(
    cam: &CameraModel,
    observer: &Pose2D,
    target: Point2,
) -> Result<f64, GeometryError> {
    relative_bearing(&cam.optical_pose(observer), target)
}

/// Boundary-inclusive test on an optical-axis bearing.
pub fn bearing_in_fov(cam: &CameraModel, bearing: f64) -> bool {
    bearing.abs() <= cam.half_fov()
}

pub fn in_fov(cam: &CameraModel, observer: &Pose2D, target: Point2) -> Result<bool, GeometryError> {
    Ok(bearing_in_fov(cam, camera_bearing(cam, observer, target)?))
}

/// Image column for an optical-axis bearing, `None` outside the field of view.
pub fn bearing_to_column(cam: &CameraModel, bearing: f64) -> Option<f64> {
    if !bearing_in_fov(cam, bearing) {
        return None;
    }
    let w = cam.image_width;
    let u = (w / 2.0) * (1.0 - libm::tan(bearing) / libm::tan(cam.half_fov()));
    Some(u.clamp(0.0, w))
}

/// Optical-axis bearing for an image column; inverse of [`bearing_to_column`].
pub fn column_to_bearing(cam: &CameraModel, u: f64) -> Result<f64, GeometryError> {
    let w = cam.image_width;
    if !(0.0..=w).contains(&u) {
        return Err(GeometryError::ColumnOutOfRange { u, width: w });
    }
    Ok(libm::atan((1.0 - 2.0 * u / w) * libm::tan(cam.half_fov())))
}

/// Pixel position of `target` in the main camera image, with the vertical
/// coordinate fixed at the camera's head row. `None` when out of view.
pub fn world_to_screen(
    cam: &CameraModel,
    observer: &Pose2D,
    target: Point2,
) -> Result<Option<(f64, f64)>, GeometryError> {
    let beta = camera_bearing(cam, observer, target)?;
    Ok(bearing_to_column(cam, beta).map(|u| (u, cam.head_row)))
}

/// World-frame azimuth of the ray through image column `u`.
pub fn screen_to_azimuth(
    cam: &CameraModel,
    observer: &Pose2D,
    u: f64,
) -> Result<f64, GeometryError> {
    let beta = column_to_bearing(cam, u)?;
    Ok(normalize_angle(observer.heading + cam.pan + beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn origin(heading: f64) -> Pose2D {
        Pose2D::new(0.0, 0.0, heading)
    }

    fn at_bearing(deg: f64) -> Point2 {
        Point2::new(deg.to_radians().cos(), deg.to_radians().sin())
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < EPS);
        assert!((normalize_angle(-PI / 2.0) + PI / 2.0).abs() < EPS);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn bearing_examples() {
        assert_eq!(
            relative_bearing(&origin(0.0), Point2::new(1.0, 0.0)).unwrap(),
            0.0
        );
        let left = relative_bearing(&origin(0.0), Point2::new(0.0, 1.0)).unwrap();
        assert!((left - PI / 2.0).abs() < EPS);
        let b = relative_bearing(&origin(PI / 4.0), Point2::new(1.0, 0.0)).unwrap();
        assert!((b + PI / 4.0).abs() < EPS);
    }

    #[test]
    fn bearing_behind_is_pi() {
        let b = relative_bearing(&origin(0.0), Point2::new(-2.0, 0.0)).unwrap();
        assert_eq!(b, PI);
    }

    #[test]
    fn coincident_points_rejected() {
        let err = relative_bearing(&origin(0.3), Point2::new(0.0, 0.0)).unwrap_err();
        assert_eq!(err, GeometryError::Coincident);
        assert!(in_fov(
            &CameraModel::default(),
            &origin(0.0),
            Point2::new(1e-12, 0.0)
        )
        .is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let err = relative_bearing(&origin(0.0), Point2::new(f64::NAN, 0.0)).unwrap_err();
        assert_eq!(err, GeometryError::NonFinite);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)), 5.0);
        let diag = distance(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0));
        assert!((diag - 11.3137085).abs() < 1e-7);
    }

    #[test]
    fn fov_examples() {
        let cam = CameraModel::default();
        assert!(in_fov(&cam, &origin(0.0), at_bearing(0.0)).unwrap());
        assert!(!in_fov(&cam, &origin(0.0), at_bearing(61.0)).unwrap());
        assert!(!in_fov(&cam, &origin(0.0), at_bearing(-61.0)).unwrap());
        // exact boundary, tested on the bearing itself to avoid trig rounding
        assert!(bearing_in_fov(&cam, cam.half_fov()));
        assert!(bearing_in_fov(&cam, -cam.half_fov()));
    }

    #[test]
    fn pan_rotates_fov() {
        let cam = CameraModel::default().with_pan_tilt(PI / 2.0, 0.0);
        assert!(in_fov(&cam, &origin(0.0), Point2::new(0.0, 3.0)).unwrap());
        assert!(!in_fov(&cam, &origin(0.0), Point2::new(3.0, 0.0)).unwrap());
    }

    #[test]
    fn screen_examples() {
        let cam = CameraModel::default();
        let w = cam.image_width;
        let (u, v) = world_to_screen(&cam, &origin(0.0), at_bearing(0.0))
            .unwrap()
            .unwrap();
        assert!((u - w / 2.0).abs() < 1e-9);
        assert_eq!(v, cam.head_row);
        assert_eq!(bearing_to_column(&cam, cam.half_fov()), Some(0.0));
        assert_eq!(bearing_to_column(&cam, -cam.half_fov()), Some(w));
        assert!(world_to_screen(&cam, &origin(0.0), at_bearing(61.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn azimuth_examples() {
        let cam = CameraModel::default().with_pan_tilt(0.2, 0.0);
        let pose = origin(0.5);
        let centre = screen_to_azimuth(&cam, &pose, cam.image_width / 2.0).unwrap();
        assert!((centre - 0.7).abs() < EPS);
        let left = screen_to_azimuth(&cam, &pose, 0.0).unwrap();
        assert!((left - (0.7 + cam.half_fov())).abs() < 1e-12);
        let err = screen_to_azimuth(&cam, &pose, cam.image_width + 1.0).unwrap_err();
        assert!(matches!(err, GeometryError::ColumnOutOfRange { .. }));
        assert!(screen_to_azimuth(&cam, &pose, -0.5).is_err());
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::with_hfov(0.0).is_err());
        assert!(CameraModel::with_hfov(PI).is_err());
        assert!(CameraModel::with_hfov(1.0).is_ok());
    }

    #[test]
    fn pan_tilt_clamped() {
        let cam = CameraModel::default().with_pan_tilt(200f64.to_radians(), -90f64.to_radians());
        assert!((cam.pan - 171.5f64.to_radians()).abs() < EPS);
        assert!((cam.tilt + 60f64.to_radians()).abs() < EPS);
    }

    #[test]
    fn floor_ray_end() {
        let ray = FloorRay::new(Point2::new(1.0, 1.0), PI / 2.0, 3.0, 5.0);
        let end = ray.end();
        assert!((end.x - 1.0).abs() < 1e-12 && (end.y - 4.0).abs() < 1e-12);
    }
}
