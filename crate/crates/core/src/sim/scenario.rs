//! Scenario files: arena, display boards, leader route, roles and condition.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Pose2D};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no bundled layout {0} (expected 1-4)")]
    UnknownLayout(u8),
}

/// Which feature set the robot runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// All awareness augmentations enabled.
    Teleaware,
    /// Plain telepresence robot: no indicators, references, taps or pan-tilt.
    Standard,
}

impl Condition {
    pub fn augmented(self) -> bool {
        self == Condition::Teleaware
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Teleaware => "teleaware",
            Condition::Standard => "standard",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "teleaware" => Ok(Condition::Teleaware),
            "standard" => Ok(Condition::Standard),
            other => Err(format!("unknown condition {other:?} (teleaware|standard)")),
        }
    }
}

/// Who leads the tour: the scripted local visitor or the remote operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderSide {
    Local,
    Remote,
}

impl LeaderSide {
    pub fn as_str(self) -> &'static str {
        match self {
            LeaderSide::Local => "local",
            LeaderSide::Remote => "remote",
        }
    }
}

impl fmt::Display for LeaderSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LeaderSide {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(LeaderSide::Local),
            "remote" => Ok(LeaderSide::Remote),
            other => Err(format!("unknown leader {other:?} (local|remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaSpec {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_hall_width")]
    pub hall_width: f64,
    #[serde(default = "default_hall_height")]
    pub hall_height: f64,
}

fn default_hall_width() -> f64 {
    9.0
}

fn default_hall_height() -> f64 {
    10.0
}

impl Default for ArenaSpec {
    fn default() -> Self {
        Self {
            width: 8.0,
            height: 8.0,
            hall_width: default_hall_width(),
            hall_height: default_hall_height(),
        }
    }
}

impl ArenaSpec {
    pub fn contains(&self, p: Point2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Position clamped to the walls, heading untouched.
    pub fn clamp_pose(&self, pose: Pose2D) -> Pose2D {
        let p = self.clamp(pose.position());
        Pose2D {
            x: p.x,
            y: p.y,
            heading: pose.heading,
        }
    }
}

fn default_visit_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Board {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Direction the board's face points, degrees.
    #[serde(default)]
    pub facing_deg: f64,
    pub content: bool,
    #[serde(default = "default_visit_radius")]
    pub visit_radius: f64,
}

impl Board {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.facing_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub boards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub leader: LeaderSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub mode: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

impl StartPose {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.heading_deg.to_radians())
    }
}

/// Start poses by role, so swapping leadership keeps the same geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub leader: StartPose,
    pub follower: StartPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub layout_id: u8,
    pub seed: u64,
    pub arena: ArenaSpec,
    #[serde(rename = "board")]
    pub boards: Vec<Board>,
    pub route: Route,
    pub roles: Roles,
    pub condition: ConditionSpec,
    pub start: Start,
}

const LAYOUTS: [&str; 4] = [
    include_str!("../../layouts/layout1.toml"),
    include_str!("../../layouts/layout2.toml"),
    include_str!("../../layouts/layout3.toml"),
    include_str!("../../layouts/layout4.toml"),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// One of the four bundled exhibition layouts.
    pub fn layout(id: u8) -> Result<Self, ScenarioError> {
        let text = LAYOUTS
            .get(usize::from(id).wrapping_sub(1))
            .ok_or(ScenarioError::UnknownLayout(id))?;
        Self::from_toml(text)
    }

    pub fn layout_source(id: u8) -> Option<&'static str> {
        LAYOUTS.get(usize::from(id).wrapping_sub(1)).copied()
    }

    pub fn condition(&self) -> Condition {
        self.condition.mode
    }

    pub fn leader(&self) -> LeaderSide {
        self.roles.leader
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition.mode = condition;
        self
    }

    pub fn with_leader(mut self, leader: LeaderSide) -> Self {
        self.roles.leader = leader;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn board(&self, id: &str) -> Option<&Board> {
        self.boards.iter().find(|b| b.id == id)
    }

    /// Board indices in route order.
    pub fn route_indices(&self) -> Vec<usize> {
        self.route
            .boards
            .iter()
            .filter_map(|id| self.boards.iter().position(|b| &b.id == id))
            .collect()
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(1..=4).contains(&self.layout_id) {
            return bad(format!("layout_id {} outside 1-4", self.layout_id));
        }
        let a = &self.arena;
        if !(a.width > 0.0 && a.height > 0.0) {
            return bad("arena must have positive size".into());
        }
        if a.width > a.hall_width || a.height > a.hall_height {
            return bad("arena larger than the hall".into());
        }
        let mut ids = BTreeSet::new();
        for b in &self.boards {
            if !ids.insert(b.id.as_str()) {
                return bad(format!("duplicate board id {:?}", b.id));
            }
            if !a.contains(b.position()) {
                return bad(format!("board {:?} outside the arena", b.id));
            }
            if !(b.visit_radius > 0.0) {
                return bad(format!("board {:?} needs a positive visit radius", b.id));
            }
        }
        if self.route.boards.is_empty() {
            return bad("route is empty".into());
        }
        let content: BTreeSet<&str> = self
            .boards
            .iter()
            .filter(|b| b.content)
            .map(|b| b.id.as_str())
            .collect();
        let mut visited = BTreeSet::new();
        for id in &self.route.boards {
            if !content.contains(id.as_str()) {
                return bad(format!("route stop {id:?} is not a content board"));
            }
            if !visited.insert(id.as_str()) {
                return bad(format!("route visits {id:?} twice"));
            }
        }
        if visited != content {
            return bad("route must visit every content board".into());
        }
        for (name, p) in [
            ("leader", &self.start.leader),
            ("follower", &self.start.follower),
        ] {
            if !a.contains(Point2::new(p.x, p.y)) {
                return bad(format!("{name} start outside the arena"));
            }
        }
        Ok(())
    }

    /// Extra checks for the exhibition task: six boards, four with content.
    pub fn validate_experiment(&self) -> Result<(), ScenarioError> {
        self.validate()?;
        let content = self.boards.iter().filter(|b| b.content).count();
        if self.boards.len() != 6 || content != 4 {
            return Err(ScenarioError::Invalid(format!(
                "experiment layouts need 6 boards with 4 content, got {} with {content}",
                self.boards.len()
            )));
        }
        Ok(())
    }
}
