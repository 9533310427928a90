//! Partner indicator shown to the remote operator: an icon anchored over the
//! partner while they are on camera, an edge arrow while they are not, plus
//! distance and a stationary/moving flag.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    bearing_in_fov, bearing_to_column, camera_bearing, distance, GeometryError, Point2,
};
use crate::kinematics::RobotState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AwarenessError {
    #[error("speed window is empty")]
    InsufficientData,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovementState {
    #[default]
    Stationary,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwarenessConfig {
    pub move_hi_mps: f64,
    pub move_lo_mps: f64,
    pub window_s: f64,
}

impl Default for AwarenessConfig {
    fn default() -> Self {
        Self {
            move_hi_mps: 0.20,
            move_lo_mps: 0.10,
            window_s: 0.5,
        }
    }
}

const MEAN_EPS: f64 = 1e-12;

/// Mean-speed classifier with a hysteresis band between `move_lo_mps` and
/// `move_hi_mps`; inside the band the previous state is kept.
pub fn classify_movement(
    window: &[(f64, f64)],
    previous: MovementState,
    cfg: &AwarenessConfig,
) -> Result<MovementState, AwarenessError> {
    if window.is_empty() {
        return Err(AwarenessError::InsufficientData);
    }
    let mean = window.iter().map(|&(speed, _)| speed).sum::<f64>() / window.len() as f64;
    // a window of identical samples may average an ulp off the sample value
    Ok(if mean >= cfg.move_hi_mps - MEAN_EPS {
        MovementState::Moving
    } else if mean <= cfg.move_lo_mps + MEAN_EPS {
        MovementState::Stationary
    } else {
        previous
    })
}

/// Sliding speed window feeding [`classify_movement`]. Keeps its own
/// previous state so the sim loop only pushes samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MovementTracker {
    samples: VecDeque<(f64, f64)>,
    state: MovementState,
}

impl MovementTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> MovementState {
        self.state
    }

    pub fn samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }

    pub fn push(&mut self, speed: f64, timestamp: f64, cfg: &AwarenessConfig) -> MovementState {
        self.samples.push_back((speed, timestamp));
        while let Some(&(_, t)) = self.samples.front() {
            if timestamp - t >= cfg.window_s {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        let window = self.samples.make_contiguous();
        if let Ok(state) = classify_movement(window, self.state, cfg) {
            self.state = state;
        }
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum IndicatorMode {
    InView { u: f64, v: f64 },
    OutOfView { edge_u: f64, arrow_bearing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerIndicator {
    pub mode: IndicatorMode,
    /// Unrounded; see [`PartnerIndicator::distance_label`] for display.
    pub distance: f64,
    pub movement: MovementState,
}

impl PartnerIndicator {
    pub fn is_in_view(&self) -> bool {
        matches!(self.mode, IndicatorMode::InView { .. })
    }

    /// Distance rounded to 0.1 m, e.g. `"1.2 m"`.
    pub fn distance_label(&self) -> String {
        format!("{:.1} m", self.distance)
    }
}

pub fn compute_indicator(
    robot: &RobotState,
    partner: Point2,
    movement: MovementState,
) -> Result<PartnerIndicator, AwarenessError> {
    let cam = &robot.cam;
    let bearing = camera_bearing(cam, &robot.pose, partner)?;
    let mode = if bearing_in_fov(cam, bearing) {
        // bearing_to_column is Some whenever bearing_in_fov holds
        let u = bearing_to_column(cam, bearing).unwrap_or(cam.image_width / 2.0);
        IndicatorMode::InView { u, v: cam.head_row }
    } else {
        let edge_u = if bearing > 0.0 { 0.0 } else { cam.image_width };
        IndicatorMode::OutOfView {
            edge_u,
            arrow_bearing: bearing,
        }
    };
    Ok(PartnerIndicator {
        mode,
        distance: distance(robot.pose.position(), partner),
        movement,
    })
}
