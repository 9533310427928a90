//! Deterministic local-site simulation.

pub mod operator;
pub mod policy;
pub mod scenario;
pub mod skeleton;
pub mod world;

pub use operator::ScriptedOperator;
pub use policy::{follower_policy, leader_policy, PolicyParams, RouteProgress, Velocity};
pub use scenario::{Board, Condition, LeaderSide, Scenario, ScenarioError};
pub use skeleton::synth_skeleton;
pub use world::{TickRecord, World, DT, TICK_MS};
