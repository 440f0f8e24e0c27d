//! Desk-scale embodied-AI benchmark simulator.
//!
//! The crate bundles a deterministic 2-D simulation kernel ([`sim`],
//! [`grid`]), a social-force crowd ([`crowd`]), three benchmark
//! environments ([`envs`]), baseline planners ([`planners`]), the scoring
//! formulas ([`metrics`]), a vectorized executor ([`parallel`]) and the
//! record/report plumbing used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod crowd;
pub mod envs;
pub mod error;
pub mod geom;
pub mod grid;
pub mod metrics;
pub mod parallel;
pub mod planners;
pub mod record;
pub mod report;
pub mod runner;
pub mod rng;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
pub use geom::{Pose, Rect, Segment, Vec2};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    pub mod scenarios {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    pub mod kernel {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    pub mod tasks {}
    #[doc = include_str!("../../../book/src/planners.md")]
    pub mod planners {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    pub mod scoring {}
    #[doc = include_str!("../../../book/src/records.md")]
    pub mod records {}
    #[doc = include_str!("../../../book/src/parallel.md")]
    pub mod parallel {}
}
