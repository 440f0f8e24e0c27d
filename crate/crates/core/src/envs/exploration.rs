//! Single-agent paper-ball cleanup in a multi-room floor plan.
//!
//! The agent moves in fixed-length increments along A* paths over an
//! occupancy grid inflated by its radius, so every step is collision-free by
//! construction. Spawn and papers are drawn from one connected free
//! component, which makes every episode solvable.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mapgen::{FloorPlan, RoomLayout};
use super::{Environment, Transition};
use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Pose, Segment, Vec2};
use crate::grid::{clearance_grid, egocentric_patch, rasterize, Cell, GridMap, Patch};
use crate::metrics::EpisodeOutcome;
use crate::planners::astar;
use crate::rng::{seeded_rng, EnvSeed, SimRng};
use crate::sim::WorldState;

/// Cells per side of the egocentric patch.
pub const PATCH_CELLS: usize = 19;
/// Side of the egocentric patch, meters.
pub const PATCH_EXTENT: f64 = 2.08;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    pub room_layout: RoomLayout,
    pub n_papers: usize,
    pub t_max: u32,
    pub agent_radius: f64,
    /// Distance covered by one MoveTo step.
    pub step_length: f64,
    /// Yaw rate limit for RotateTo, rad/s.
    pub max_turn_rate: f64,
    pub dt: f64,
    pub pickup_radius: f64,
    pub sensor_range: f64,
    pub cell_size: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            room_layout: RoomLayout::default(),
            n_papers: 5,
            t_max: 500,
            agent_radius: 0.25,
            step_length: 0.25,
            max_turn_rate: PI,
            dt: 0.25,
            pickup_radius: 0.3,
            sensor_range: 3.0,
            cell_size: PATCH_EXTENT / PATCH_CELLS as f64,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("exploration: {m}")));
        if self.n_papers == 0 {
            return bad("n_papers must be at least 1");
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1");
        }
        for (name, v) in [
            ("agent_radius", self.agent_radius),
            ("step_length", self.step_length),
            ("max_turn_rate", self.max_turn_rate),
            ("dt", self.dt),
            ("pickup_radius", self.pickup_radius),
            ("sensor_range", self.sensor_range),
            ("cell_size", self.cell_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        self.room_layout.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationAction {
    MoveTo { target: Vec2 },
    RotateTo { heading: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationObs {
    pub patch: Patch,
    pub pose: Pose,
    /// Visible papers in the agent frame (x forward, y left).
    pub papers_in_view: Vec<Vec2>,
    pub steps_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationEvent {
    Collected { paper: usize, position: Vec2 },
    /// A move was cut short by the inflated obstacle boundary.
    Collision { position: Vec2 },
    Terminated { success: bool, steps: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorationEnv {
    config: ExplorationConfig,
    rng: SimRng,
    plan: Option<FloorPlan>,
    segments: Vec<Segment>,
    occupancy: GridMap,
    free: GridMap,
    component: Vec<bool>,
    pose: Pose,
    spawn: Vec2,
    /// `(id, position)` of papers not yet collected.
    papers: Vec<(usize, Vec2)>,
    steps: u32,
    done: bool,
}

impl ExplorationEnv {
    pub fn new(config: ExplorationConfig) -> Result<Self> {
        config.validate()?;
        let empty = GridMap::new(Vec2::ZERO, config.cell_size, 1, 1);
        Ok(Self {
            config,
            rng: seeded_rng(0),
            plan: None,
            segments: Vec::new(),
            occupancy: empty.clone(),
            free: empty,
            component: Vec::new(),
            pose: Pose::new(Vec2::ZERO, 0.0),
            spawn: Vec2::ZERO,
            papers: Vec::new(),
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &ExplorationConfig {
        &self.config
    }

    pub fn plan(&self) -> Option<&FloorPlan> {
        self.plan.as_ref()
    }

    /// Occupancy of walls and furniture, not inflated.
    pub fn occupancy(&self) -> &GridMap {
        &self.occupancy
    }

    /// Cells whose centers give the agent full clearance.
    pub fn free_space(&self) -> &GridMap {
        &self.free
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn spawn(&self) -> Vec2 {
        self.spawn
    }

    pub fn papers(&self) -> Vec<Vec2> {
        self.papers.iter().map(|&(_, p)| p).collect()
    }

    /// `(id, position)` of papers not yet collected.
    pub fn remaining_papers(&self) -> Vec<(usize, Vec2)> {
        self.papers.clone()
    }

    pub fn steps_used(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset_with(&mut self, seed: Option<EnvSeed>) -> Result<ExplorationObs> {
        if let Some(s) = seed {
            self.rng = s.rng();
        }
        let cfg = &self.config;
        let plan = cfg.room_layout.build(&mut self.rng)?;
        let mut world = WorldState::new(cfg.dt, 0);
        world.obstacles = plan.segments();

        let mut occupancy = rasterize(&world, cfg.cell_size, plan.bounds);
        plan.fill_furniture(&mut occupancy);
        let mut free = clearance_grid(&world, cfg.cell_size, plan.bounds, cfg.agent_radius);
        plan.fill_furniture(&mut free);

        let cells = free.largest_component();
        if cells.len() < cfg.n_papers + 1 {
            return Err(Error::Config(format!(
                "exploration: free component has {} cells, need {}",
                cells.len(),
                cfg.n_papers + 1
            )));
        }
        let picks = sample(&mut self.rng, cells.len(), cfg.n_papers + 1);
        let mut chosen = picks.iter().map(|i| free.cell_center(cells[i]));
        let spawn = chosen.next().expect("sampled at least one cell");
        let papers: Vec<(usize, Vec2)> = chosen.enumerate().collect();
        let heading = self.rng.random_range(-PI..PI);

        self.component = free.component_mask(cells[0]);
        self.segments = world.obstacles;
        self.occupancy = occupancy;
        self.free = free;
        self.plan = Some(plan);
        self.pose = Pose::new(spawn, heading);
        self.spawn = spawn;
        self.papers = papers;
        self.steps = 0;
        self.done = false;
        Ok(self.observe())
    }

    pub fn step_action(&mut self, action: ExplorationAction) -> Result<(ExplorationObs, Vec<ExplorationEvent>)> {
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        let mut events = Vec::new();
        match action {
            ExplorationAction::MoveTo { target } => {
                if !target.is_finite() {
                    return Err(Error::InvalidArgument("MoveTo target must be finite".into()));
                }
                if let Some(stop) = self.advance(target) {
                    events.push(ExplorationEvent::Collision { position: stop });
                }
            }
            ExplorationAction::RotateTo { heading } => {
                if !heading.is_finite() {
                    return Err(Error::InvalidArgument("RotateTo heading must be finite".into()));
                }
                let max = self.config.max_turn_rate * self.config.dt;
                let diff = normalize_angle(heading - self.pose.heading);
                self.pose.heading = normalize_angle(self.pose.heading + diff.clamp(-max, max));
            }
        }
        self.steps += 1;

        let here = self.pose.position;
        let radius = self.config.pickup_radius;
        self.papers.retain(|&(id, p)| {
            if p.distance(here) <= radius {
                events.push(ExplorationEvent::Collected { paper: id, position: p });
                false
            } else {
                true
            }
        });
        let success = self.papers.is_empty();
        if success || self.steps >= self.config.t_max {
            self.done = true;
            events.push(ExplorationEvent::Terminated {
                success,
                steps: self.steps,
            });
        }
        Ok((self.observe(), events))
    }

    pub fn episode_outcome(&self) -> Result<EpisodeOutcome> {
        if !self.done || self.plan.is_none() {
            return Err(Error::EpisodeRunning);
        }
        Ok(EpisodeOutcome {
            success: self.papers.is_empty(),
            steps: self.steps,
        })
    }

    /// Free cell the agent currently occupies (its own cell, or the nearest free one).
    fn agent_cell(&self) -> Option<Cell> {
        let p = self.pose.position;
        self.free
            .cell_of(p)
            .filter(|&c| self.free.is_free(c))
            .or_else(|| self.free.nearest_free(p))
    }

    fn reachable(&self, cell: Cell) -> bool {
        self.free.is_free(cell) && self.component[cell.1 * self.free.width + cell.0]
    }

    /// Moves one increment toward `target`. Returns the stop point when the
    /// move was cut short by an obstacle.
    fn advance(&mut self, target: Vec2) -> Option<Vec2> {
        let step = self.config.step_length;
        let from = self.pose.position;
        if from.distance(target) < 1e-12 {
            return None;
        }
        let goal_cell = self.free.cell_of(target).filter(|&c| self.reachable(c));
        let route = match (self.agent_cell(), goal_cell) {
            (Some(a), Some(g)) => astar(&self.free, a, g).ok().map(|path| {
                let mut pts = vec![from];
                let n = path.waypoints.len();
                if n > 2 {
                    pts.extend_from_slice(&path.waypoints[1..n - 1]);
                }
                pts.push(target);
                pts
            }),
            _ => None,
        };
        match route {
            Some(pts) => {
                let (p, dir) = walk(&pts, step);
                self.pose.position = p;
                if let Some(d) = dir {
                    self.pose.heading = d.angle();
                }
                None
            }
            None => {
                // Straight line, halted at the last free point of the inflated grid.
                let dir = (target - from).normalized()?;
                self.pose.heading = dir.angle();
                let want = step.min(from.distance(target));
                let probe = self.config.cell_size / 8.0;
                let mut reached = 0.0;
                let mut t = 0.0;
                while t < want {
                    t = (t + probe).min(want);
                    if self.free.occupied_at(from + dir * t) {
                        break;
                    }
                    reached = t;
                }
                self.pose.position = from + dir * reached;
                (reached < want).then_some(self.pose.position)
            }
        }
    }

    fn observe(&self) -> ExplorationObs {
        let me = self.pose.position;
        let papers_in_view = self
            .papers
            .iter()
            .filter(|&&(_, p)| {
                p.distance(me) <= self.config.sensor_range && {
                    let sight = Segment::new(me, p);
                    !self.segments.iter().any(|s| s.intersects(&sight))
                }
            })
            .map(|&(_, p)| self.pose.to_local(p))
            .collect();
        ExplorationObs {
            patch: egocentric_patch(&self.occupancy, &self.pose, PATCH_CELLS, PATCH_EXTENT),
            pose: self.pose,
            papers_in_view,
            steps_used: self.steps,
        }
    }
}

/// Point `dist` along polyline `pts` and the direction of travel there.
fn walk(pts: &[Vec2], mut dist: f64) -> (Vec2, Option<Vec2>) {
    let mut last_dir = None;
    for w in pts.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if len < 1e-12 {
            continue;
        }
        last_dir = Some(seg / len);
        if dist <= len {
            return (w[0] + seg * (dist / len), last_dir);
        }
        dist -= len;
    }
    (*pts.last().expect("non-empty polyline"), last_dir)
}

impl Environment for ExplorationEnv {
    type Observation = ExplorationObs;
    type Action = ExplorationAction;

    fn reset(&mut self, seed: Option<EnvSeed>) -> Result<ExplorationObs> {
        self.reset_with(seed)
    }

    fn step(&mut self, action: ExplorationAction) -> Result<Transition<ExplorationObs>> {
        let (observation, events) = self.step_action(action)?;
        let collected = events
            .iter()
            .filter(|e| matches!(e, ExplorationEvent::Collected { .. }))
            .count();
        Ok(Transition {
            observation,
            rewards: vec![collected as f64],
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    fn single_room(w: f64, h: f64) -> RoomLayout {
        let bounds = Rect::new(Vec2::ZERO, Vec2::new(w, h));
        RoomLayout::Explicit {
            bounds,
            walls: bounds.edges().to_vec(),
            furniture: vec![],
        }
    }

    fn env(config: ExplorationConfig, seed: u64) -> ExplorationEnv {
        let mut e = ExplorationEnv::new(config).unwrap();
        e.reset_with(Some(EnvSeed::new(seed))).unwrap();
        e
    }

    #[test]
    fn same_seed_same_layout() {
        let a = env(ExplorationConfig::default(), 42);
        let b = env(ExplorationConfig::default(), 42);
        assert_eq!(a.spawn(), b.spawn());
        assert_eq!(a.papers(), b.papers());
        assert_eq!(a.plan(), b.plan());
    }

    #[test]
    fn empty_room_papers_keep_wall_clearance() {
        let cfg = ExplorationConfig {
            room_layout: single_room(4.0, 3.0),
            n_papers: 3,
            ..ExplorationConfig::default()
        };
        for seed in 0..20 {
            let e = env(cfg.clone(), seed);
            assert_eq!(e.papers().len(), 3);
            for p in e.papers() {
                let d = e.segments.iter().map(|s| s.distance_to(p)).fold(f64::INFINITY, f64::min);
                assert!(d >= cfg.agent_radius, "paper {p:?} only {d} from a wall");
            }
        }
    }

    #[test]
    fn observation_shape() {
        let e = env(ExplorationConfig::default(), 1);
        let obs = e.observe();
        assert_eq!(obs.patch.size, 19);
        assert_eq!(obs.patch.cells.len(), 361);
        assert_eq!(obs.steps_used, 0);
    }

    #[test]
    fn pickup_at_threshold_finishes_episode() {
        let cfg = ExplorationConfig {
            room_layout: single_room(4.0, 4.0),
            n_papers: 1,
            ..ExplorationConfig::default()
        };
        let mut e = env(cfg, 0);
        e.pose.position = Vec2::new(2.0, 2.0);
        e.papers = vec![(0, Vec2::new(2.2, 2.0))];
        let (_, events) = e.step_action(ExplorationAction::MoveTo { target: Vec2::new(2.2, 2.0) }).unwrap();
        assert!(events.iter().any(|ev| matches!(ev, ExplorationEvent::Collected { paper: 0, .. })));
        assert!(events.contains(&ExplorationEvent::Terminated { success: true, steps: 1 }));
        assert_eq!(e.episode_outcome().unwrap(), EpisodeOutcome { success: true, steps: 1 });
        assert!(matches!(
            e.step_action(ExplorationAction::RotateTo { heading: 0.0 }),
            Err(Error::EpisodeTerminated)
        ));
    }

    #[test]
    fn timeout_is_failure() {
        let cfg = ExplorationConfig { t_max: 4, ..ExplorationConfig::default() };
        let mut e = env(cfg, 9);
        assert!(matches!(e.episode_outcome(), Err(Error::EpisodeRunning)));
        for _ in 0..4 {
            e.step_action(ExplorationAction::RotateTo { heading: 1.0 }).unwrap();
        }
        assert_eq!(e.episode_outcome().unwrap(), EpisodeOutcome { success: false, steps: 4 });
    }

    #[test]
    fn success_on_last_step_counts() {
        let cfg = ExplorationConfig {
            room_layout: single_room(4.0, 4.0),
            n_papers: 1,
            t_max: 3,
            ..ExplorationConfig::default()
        };
        let mut e = env(cfg, 0);
        e.pose.position = Vec2::new(1.0, 2.0);
        e.papers = vec![(0, Vec2::new(1.85, 2.0))];
        let target = Vec2::new(1.85, 2.0);
        e.step_action(ExplorationAction::MoveTo { target }).unwrap();
        e.step_action(ExplorationAction::MoveTo { target }).unwrap();
        assert!(!e.is_done());
        e.step_action(ExplorationAction::MoveTo { target }).unwrap();
        assert_eq!(e.episode_outcome().unwrap(), EpisodeOutcome { success: true, steps: 3 });
    }

    #[test]
    fn rotation_is_rate_limited() {
        let mut e = env(ExplorationConfig::default(), 2);
        e.pose.heading = 0.0;
        e.step_action(ExplorationAction::RotateTo { heading: 3.0 }).unwrap();
        assert!((e.pose.heading - PI / 4.0).abs() < 1e-12);
        e.step_action(ExplorationAction::RotateTo { heading: 0.9 }).unwrap();
        assert!((e.pose.heading - 0.9).abs() < 1e-12);
    }

    #[test]
    fn moving_into_wall_stops_at_inflated_boundary() {
        let cfg = ExplorationConfig {
            room_layout: single_room(4.0, 4.0),
            n_papers: 1,
            ..ExplorationConfig::default()
        };
        let mut e = env(cfg.clone(), 0);
        e.papers = vec![(0, Vec2::new(0.5, 0.5))];
        e.pose.position = Vec2::new(2.0, 2.0);
        let wall_point = Vec2::new(4.0, 2.0);
        let mut collided = false;
        for _ in 0..20 {
            let (_, events) = e.step_action(ExplorationAction::MoveTo { target: wall_point }).unwrap();
            collided |= events.iter().any(|ev| matches!(ev, ExplorationEvent::Collision { .. }));
        }
        assert!(collided);
        assert_eq!(e.steps_used(), 20);
        // Oracle: the inflated boundary sits where a cell center first loses
        // `agent_radius` clearance; the agent stays within one cell of it.
        let gap = 4.0 - e.pose.position.x;
        let half_cell = 0.5 * cfg.cell_size;
        assert!(gap >= cfg.agent_radius - half_cell, "gap {gap}");
        assert!(gap <= cfg.agent_radius + 2.0 * cfg.cell_size, "gap {gap}");
    }

    #[test]
    fn too_small_component_is_config_error() {
        let cfg = ExplorationConfig {
            room_layout: single_room(0.8, 0.8),
            n_papers: 50,
            ..ExplorationConfig::default()
        };
        let mut e = ExplorationEnv::new(cfg).unwrap();
        assert!(matches!(e.reset_with(Some(EnvSeed::new(0))), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(ExplorationEnv::new(ExplorationConfig { n_papers: 0, ..Default::default() }).is_err());
        assert!(ExplorationEnv::new(ExplorationConfig { t_max: 0, ..Default::default() }).is_err());
    }
}
