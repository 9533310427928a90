//! Simulation of an awareness-augmented telepresence robot.
//!
//! A remote operator drives a robot through a local exhibition space while a
//! local visitor walks with it. The crate models the robot's awareness aids
//! (camera coverage, partner indicators, shoulder taps, shared pointing
//! references), the wire protocol between the operator console and the site,
//! a deterministic fixed-step world, and an experiment harness that measures
//! how closely the two parties move together.

pub mod awareness;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod protocol;
pub mod sharedref;
pub mod sim;

pub use awareness::{MovementState, PartnerIndicator};
pub use config::SimConfig;
pub use geometry::{CameraModel, FloorRay, Point2, Pose2D};
pub use kinematics::{DriveCommand, RobotState};
pub use protocol::{Envelope, LinkModel, Payload};
pub use sim::{Condition, LeaderSide, Scenario, World};
