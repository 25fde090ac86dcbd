//! Seeded simulator and benchmark harness for mobile-robot task scheduling.
//!
//! A scenario places a robot, a list of timed tasks and a few pedestrians on a
//! generated indoor map. Each step a decision agent picks the job the robot
//! works on, and an eval function scores the decision. The [`bench`] module
//! runs many scenarios and summarizes how each agent fared.

pub mod agents;
pub mod bench;
pub mod crowd;
pub mod determinism;
pub mod dqn;
pub mod engine;
pub mod eval;
pub mod geom;
pub mod navgrid;
pub mod tasks;
pub mod worldgen;

pub use agents::{AgentDecision, AgentSpec, Choice, DecisionAgent};
pub use determinism::{SeedSet, Stream};
pub use engine::{OutcomeKind, RobotState, Scenario, ScenarioConfig, ScenarioOutcome};
pub use eval::{EvalFunction, EvalResult};
pub use geom::{Cell, Point};
pub use tasks::{Task, TaskId, TaskKind};
pub use worldgen::{EnvParams, EnvironmentMap};
