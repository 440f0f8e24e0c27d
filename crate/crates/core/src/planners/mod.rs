//! Baseline decision modules: A* global planning, DWA and MPPI local
//! control, and scripted or random policies for every task.

mod astar;
pub mod dwa;
pub mod local;
pub mod mppi;
pub mod policies;

pub use astar::{astar, astar_world, octile, Path};
pub use dwa::{braking_rollout, dwa_control, DwaDecision, DwaParams};
pub use local::LidarCostmap;
pub use mppi::{softmin_weights, Mppi, MppiParams, MppiStep};
pub use policies::{GreedyCoop, GreedyParams, NavAgent, NavController, OracleParams};
