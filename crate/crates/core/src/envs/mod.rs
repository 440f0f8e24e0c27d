//! Benchmark environments and the trainer-facing stepping interface.

pub mod exploration;
pub mod macs;
pub mod mapgen;
pub mod socialnav;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::EnvSeed;

pub use exploration::{ExplorationAction, ExplorationConfig, ExplorationEnv, ExplorationObs};
pub use macs::{MacsAction, MacsConfig, MacsEnv, MacsObs, RewardBreakdown};
pub use mapgen::{FloorPlan, GeneratorParams, RoomLayout};
pub use socialnav::{RobotCommand, RobotObs, SocialNavEnv, SocialNavScenario};

/// Result of one environment step as seen by a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<O> {
    pub observation: O,
    /// One reward per agent (a single entry for single-agent tasks).
    pub rewards: Vec<f64>,
    pub done: bool,
}

/// Uniform reset/step surface shared by every task.
///
/// `reset(Some(seed))` reseeds; `reset(None)` starts a new episode that
/// continues the environment's own random stream.
pub trait Environment: Send {
    type Observation: Clone + Send;
    type Action: Send;

    fn reset(&mut self, seed: Option<EnvSeed>) -> Result<Self::Observation>;
    fn step(&mut self, action: Self::Action) -> Result<Transition<Self::Observation>>;
}
