//! Objective task measures computed from a recorded trajectory pair.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Point2, Pose2D};
use crate::sim::{Condition, LeaderSide, DT};

use super::log::EventLog;

/// Occupancy grid resolution for trajectory overlap.
pub const CELL_M: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub layout_id: u8,
    pub seed: u64,
    pub condition: Condition,
    pub leader: LeaderSide,
    /// False when the run hit the time cap before the route was done.
    pub complete: bool,
    pub ticks: u64,
    pub task_time: f64,
    pub mean_distance: f64,
    pub trajectory_overlap: f64,
    /// Robot-to-visitor distance after every tick.
    pub distances: Vec<f64>,
}

fn cell(p: Point2) -> (i64, i64) {
    (
        libm::floor(p.x / CELL_M) as i64,
        libm::floor(p.y / CELL_M) as i64,
    )
}

pub fn occupied_cells(track: impl IntoIterator<Item = Point2>) -> BTreeSet<(i64, i64)> {
    track.into_iter().map(cell).collect()
}

/// Intersection over union of the grid cells each trajectory visits. Two
/// empty trajectories count as identical.
pub fn trajectory_overlap(
    a: impl IntoIterator<Item = Point2>,
    b: impl IntoIterator<Item = Point2>,
) -> f64 {
    let a = occupied_cells(a);
    let b = occupied_cells(b);
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Report from per-tick `(robot, local)` poses.
pub fn metrics_from_track(
    layout_id: u8,
    seed: u64,
    condition: Condition,
    leader: LeaderSide,
    complete: bool,
    track: &[(Pose2D, Pose2D)],
) -> MetricsReport {
    let distances: Vec<f64> = track
        .iter()
        .map(|(r, l)| distance(r.position(), l.position()))
        .collect();
    let ticks = track.len() as u64;
    MetricsReport {
        layout_id,
        seed,
        condition,
        leader,
        complete,
        ticks,
        task_time: ticks as f64 * DT,
        mean_distance: mean(&distances),
        trajectory_overlap: trajectory_overlap(
            track.iter().map(|(r, _)| r.position()),
            track.iter().map(|(_, l)| l.position()),
        ),
        distances,
    }
}

pub fn metrics_from_log(log: &EventLog) -> MetricsReport {
    let h = &log.header;
    let track: Vec<_> = log.track().collect();
    metrics_from_track(
        h.scenario.layout_id,
        h.scenario.seed,
        h.scenario.condition(),
        h.scenario.leader(),
        h.complete,
        &track,
    )
}
