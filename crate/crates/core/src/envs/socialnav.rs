//! Point-goal navigation through a wandering crowd.
//!
//! A unicycle robot crosses a circular arena from one rim point to another
//! while social-force pedestrians roam inside. Contacts are logged as
//! collisions and personal-space intrusions are sampled at 2 Hz.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Transition};
use crate::crowd::{spawn_crowd, step_crowd, Pedestrian, SfmParams};
use crate::error::{Error, Result};
use crate::geom::{Pose, Rect, Segment, Vec2};
use crate::grid::{clearance_grid, GridMap};
use crate::metrics::SocialNavEpisode;
use crate::rng::{seeded_rng, EnvSeed, SimRng};
use crate::sim::{Body, Command, EntityClass, SensorFrame, WorldState};

/// Surface clearance below which an intrusion is Type-1, meters.
pub const TYPE1_DISTANCE: f64 = 0.45;
/// Upper bound of the Type-2 band, meters.
pub const TYPE2_DISTANCE: f64 = 1.2;
/// Proxemics sampling period, seconds.
pub const SAMPLE_PERIOD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SocialNavScenario {
    pub arena_radius: f64,
    pub n_pedestrians: usize,
    pub min_start_goal_dist: f64,
    pub t_max_wall: f64,
    pub robot_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub n_lidar: usize,
    pub lidar_range: f64,
    pub goal_tolerance: f64,
    pub dt: f64,
    /// Gap between the rim and the boundary wall.
    pub wall_margin: f64,
    /// Sides of the polygon approximating the boundary wall.
    pub wall_sides: usize,
    /// Cell size of the pedestrians' walkable grid.
    pub crowd_cell: f64,
    /// Pedestrians spawn at least this far from the start and goal.
    pub spawn_clearance: f64,
    pub sfm: SfmParams,
}

impl Default for SocialNavScenario {
    fn default() -> Self {
        Self {
            arena_radius: 20.0,
            n_pedestrians: 30,
            min_start_goal_dist: 40.0,
            t_max_wall: 120.0,
            robot_radius: 0.3,
            v_max: 2.0,
            omega_max: 2.0,
            n_lidar: 72,
            lidar_range: 10.0,
            goal_tolerance: 0.5,
            dt: 0.1,
            wall_margin: 1.0,
            wall_sides: 64,
            crowd_cell: 0.25,
            spawn_clearance: 2.0,
            sfm: SfmParams::default(),
        }
    }
}

impl SocialNavScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("socialnav: {m}")));
        for (name, v) in [
            ("arena_radius", self.arena_radius),
            ("t_max_wall", self.t_max_wall),
            ("robot_radius", self.robot_radius),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("lidar_range", self.lidar_range),
            ("goal_tolerance", self.goal_tolerance),
            ("dt", self.dt),
            ("wall_margin", self.wall_margin),
            ("crowd_cell", self.crowd_cell),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.min_start_goal_dist >= 0.0) || self.min_start_goal_dist > 2.0 * self.arena_radius {
            return bad(format!(
                "min_start_goal_dist {} exceeds the arena diameter {}",
                self.min_start_goal_dist,
                2.0 * self.arena_radius
            ));
        }
        if self.n_lidar == 0 {
            return bad("n_lidar must be at least 1".into());
        }
        if self.wall_sides < 8 {
            return bad("wall_sides must be at least 8".into());
        }
        self.sfm.validate()
    }

    /// Steps between proxemics samples: `⌈0.5 s / dt⌉`.
    pub fn sample_every(&self) -> u64 {
        ((SAMPLE_PERIOD / self.dt) - 1e-9).ceil().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotCommand {
    pub v: f64,
    pub omega: f64,
}

impl RobotCommand {
    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Clamps into `v ∈ [0, v_max]`, `ω ∈ [−ω_max, ω_max]`; non-finite parts become 0.
    pub fn clamped(self, v_max: f64, omega_max: f64) -> Self {
        let f = |x: f64| if x.is_finite() { x } else { 0.0 };
        Self {
            v: f(self.v).clamp(0.0, v_max),
            omega: f(self.omega).clamp(-omega_max, omega_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotObs {
    pub lidar: SensorFrame,
    /// Goal in the robot frame (x forward, y left).
    pub goal_relative: Vec2,
    pub pose: Pose,
    /// Last applied command.
    pub velocity: RobotCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrusionType {
    Type1,
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrusionEvent {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: IntrusionType,
    pub pedestrian_index: usize,
}

/// Band of a surface clearance, if it is an intrusion at all.
pub fn classify_clearance(d: f64) -> Option<IntrusionType> {
    if d < TYPE1_DISTANCE {
        Some(IntrusionType::Type1)
    } else if d <= TYPE2_DISTANCE {
        Some(IntrusionType::Type2)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Obstacle {
    Pedestrian(usize),
    Wall(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SocialNavEvent {
    Collision { t: f64, with: Obstacle },
    Intrusion(IntrusionEvent),
    GoalReached { t: f64 },
    Timeout { t: f64 },
    Aborted { t: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocialNavEnv {
    scenario: SocialNavScenario,
    rng: SimRng,
    /// Robot (index 0) and the boundary wall.
    world: WorldState,
    peds: Vec<Pedestrian>,
    grid: GridMap,
    start: Vec2,
    goal: Vec2,
    last_cmd: RobotCommand,
    contacts: BTreeSet<Obstacle>,
    collisions: u32,
    samples: u32,
    type1_samples: u32,
    type2_samples: u32,
    outcome: Option<bool>,
}

impl SocialNavEnv {
    pub fn new(scenario: SocialNavScenario) -> Result<Self> {
        scenario.validate()?;
        let dt = scenario.dt;
        Ok(Self {
            scenario,
            rng: seeded_rng(0),
            world: WorldState::new(dt, 0),
            peds: Vec::new(),
            grid: GridMap::new(Vec2::ZERO, 1.0, 1, 1),
            start: Vec2::ZERO,
            goal: Vec2::ZERO,
            last_cmd: RobotCommand::default(),
            contacts: BTreeSet::new(),
            collisions: 0,
            samples: 0,
            type1_samples: 0,
            type2_samples: 0,
            outcome: Some(false),
        })
    }

    pub fn scenario(&self) -> &SocialNavScenario {
        &self.scenario
    }

    pub fn robot(&self) -> &Body {
        &self.world.bodies[0]
    }

    pub fn pedestrians(&self) -> &[Pedestrian] {
        &self.peds
    }

    /// Mutable crowd access for scripted scenarios and tests.
    pub fn pedestrians_mut(&mut self) -> &mut Vec<Pedestrian> {
        &mut self.peds
    }

    pub fn walls(&self) -> &[Segment] {
        &self.world.obstacles
    }

    /// Walkable grid used by the crowd (disc of the arena radius).
    pub fn walkable(&self) -> &GridMap {
        &self.grid
    }

    pub fn start(&self) -> Vec2 {
        self.start
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn clock(&self) -> f64 {
        self.world.clock()
    }

    pub fn steps(&self) -> u64 {
        self.world.tick()
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn proxemics_samples(&self) -> u32 {
        self.samples
    }

    /// Shortest possible traversal time: straight-line distance at `v_max`.
    pub fn t_min(&self) -> f64 {
        self.start.distance(self.goal) / self.scenario.v_max
    }

    pub fn reset_with(&mut self, seed: Option<EnvSeed>) -> Result<RobotObs> {
        if let Some(s) = seed {
            self.rng = s.rng();
        }
        let sc = &self.scenario;
        let r = sc.arena_radius;
        let mut world = WorldState::with_rng(sc.dt, self.rng.clone());
        let wall_r = r + sc.wall_margin;
        let corners: Vec<Vec2> = (0..sc.wall_sides)
            .map(|k| Vec2::from_angle(TAU * k as f64 / sc.wall_sides as f64) * wall_r)
            .collect();
        for k in 0..corners.len() {
            world
                .obstacles
                .push(Segment::new(corners[k], corners[(k + 1) % corners.len()]));
        }

        let min_sep = 2.0 * (sc.min_start_goal_dist / (2.0 * r)).clamp(0.0, 1.0).asin();
        let theta = self.rng.random_range(-PI..PI);
        let sep = if min_sep >= PI { PI } else { self.rng.random_range(min_sep..=PI) };
        let sign = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let start = Vec2::from_angle(theta) * r;
        let goal = Vec2::from_angle(theta + sign * sep) * r;
        let robot = Body::new(EntityClass::Robot, start, sc.robot_radius, sc.v_max)
            .with_heading((goal - start).angle());
        world.add_body(robot);

        let bounds = Rect::new(Vec2::new(-wall_r, -wall_r), Vec2::new(wall_r, wall_r));
        let mut grid = clearance_grid(&world, sc.crowd_cell, bounds, sc.sfm.radius);
        for row in 0..grid.height {
            for col in 0..grid.width {
                if grid.cell_center((col, row)).norm() > r - sc.sfm.radius {
                    grid.set((col, row), true);
                }
            }
        }
        let keep_clear = [(start, sc.spawn_clearance), (goal, sc.spawn_clearance)];
        let peds = spawn_crowd(sc.n_pedestrians, &grid, &world, &sc.sfm, &keep_clear, &mut self.rng)?;

        self.world = world;
        self.peds = peds;
        self.grid = grid;
        self.start = start;
        self.goal = goal;
        self.last_cmd = RobotCommand::default();
        self.contacts = self.current_contacts();
        self.collisions = 0;
        self.samples = 0;
        self.type1_samples = 0;
        self.type2_samples = 0;
        self.outcome = None;
        Ok(self.observe())
    }

    pub fn step_command(&mut self, cmd: RobotCommand) -> Result<(RobotObs, Vec<SocialNavEvent>)> {
        if self.outcome.is_some() {
            return Err(Error::EpisodeTerminated);
        }
        let sc = self.scenario.clone();
        let cmd = cmd.clamped(sc.v_max, sc.omega_max);
        self.last_cmd = cmd;
        self.world
            .step_kinematics(&[(0, Command::Unicycle { v: cmd.v, omega: cmd.omega })])?;
        let t = self.world.clock();
        let mut events = Vec::new();

        // Contacts are judged on the robot's commanded motion, before anyone is pushed apart.
        let now = self.current_contacts();
        for &with in now.difference(&self.contacts) {
            events.push(SocialNavEvent::Collision { t, with });
            self.collisions += 1;
        }
        self.contacts = now;

        // Robot gives way to walls only; pedestrians give way to the robot.
        self.world.resolve_collisions();
        step_crowd(&mut self.peds, &self.world, &self.grid, &sc.sfm, sc.dt, &mut self.rng);

        if self.world.tick().is_multiple_of(sc.sample_every()) {
            let intrusions = self.sample_proxemics();
            self.samples += 1;
            if intrusions.iter().any(|e| e.kind == IntrusionType::Type1) {
                self.type1_samples += 1;
            } else if !intrusions.is_empty() {
                self.type2_samples += 1;
            }
            events.extend(intrusions.into_iter().map(SocialNavEvent::Intrusion));
        }

        if self.robot().position().distance(self.goal) <= sc.goal_tolerance {
            self.outcome = Some(true);
            events.push(SocialNavEvent::GoalReached { t });
        } else if t >= sc.t_max_wall - 1e-9 {
            self.outcome = Some(false);
            events.push(SocialNavEvent::Timeout { t });
        }
        Ok((self.observe(), events))
    }

    /// Ends the episode as a failure.
    pub fn abort(&mut self) -> Vec<SocialNavEvent> {
        if self.outcome.is_some() {
            return Vec::new();
        }
        self.outcome = Some(false);
        vec![SocialNavEvent::Aborted { t: self.clock() }]
    }

    /// One event per pedestrian inside an intrusion band around the robot.
    pub fn sample_proxemics(&self) -> Vec<IntrusionEvent> {
        let robot = self.robot();
        let t = self.clock();
        self.peds
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let d = robot.position().distance(p.position()) - robot.radius - p.body.radius;
                classify_clearance(d).map(|kind| IntrusionEvent {
                    t,
                    kind,
                    pedestrian_index: i,
                })
            })
            .collect()
    }

    fn current_contacts(&self) -> BTreeSet<Obstacle> {
        let robot = self.robot();
        let p = robot.position();
        let mut set = BTreeSet::new();
        for (i, ped) in self.peds.iter().enumerate() {
            if p.distance(ped.position()) - robot.radius - ped.body.radius <= 0.0 {
                set.insert(Obstacle::Pedestrian(i));
            }
        }
        for (k, w) in self.world.obstacles.iter().enumerate() {
            if w.distance_to(p) <= robot.radius {
                set.insert(Obstacle::Wall(k));
            }
        }
        set
    }

    pub fn observe(&self) -> RobotObs {
        let mut sensing = WorldState::with_rng(self.scenario.dt, seeded_rng(0));
        sensing.obstacles = self.world.obstacles.clone();
        sensing.add_body(self.robot().clone());
        for p in &self.peds {
            sensing.add_body(p.body.clone());
        }
        let pose = self.robot().pose;
        RobotObs {
            lidar: sensing.cast_rays(0, self.scenario.n_lidar, self.scenario.lidar_range),
            goal_relative: pose.to_local(self.goal),
            pose,
            velocity: self.last_cmd,
        }
    }

    /// Measurements for scoring; only available once the episode ended.
    pub fn episode(&self) -> Result<SocialNavEpisode> {
        let success = self.outcome.ok_or(Error::EpisodeRunning)?;
        let n = self.samples.max(1) as f64;
        Ok(SocialNavEpisode {
            success,
            t_actual: self.clock(),
            t_min: self.t_min(),
            t_max: self.scenario.t_max_wall,
            collisions: self.collisions,
            f1: self.type1_samples as f64 / n,
            f2: self.type2_samples as f64 / n,
        })
    }
}

impl Environment for SocialNavEnv {
    type Observation = RobotObs;
    type Action = RobotCommand;

    fn reset(&mut self, seed: Option<EnvSeed>) -> Result<RobotObs> {
        self.reset_with(seed)
    }

    /// Reward: progress toward the goal minus one per collision.
    fn step(&mut self, action: RobotCommand) -> Result<Transition<RobotObs>> {
        let before = self.robot().position().distance(self.goal);
        let (observation, events) = self.step_command(action)?;
        let after = self.robot().position().distance(self.goal);
        let hits = events
            .iter()
            .filter(|e| matches!(e, SocialNavEvent::Collision { .. }))
            .count();
        Ok(Transition {
            observation,
            rewards: vec![before - after - hits as f64],
            done: self.is_done(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> SocialNavScenario {
        SocialNavScenario {
            n_pedestrians: 0,
            ..SocialNavScenario::default()
        }
    }

    #[test]
    fn default_start_and_goal_are_diametric() {
        for seed in 0..10 {
            let mut e = SocialNavEnv::new(SocialNavScenario::default()).unwrap();
            e.reset_with(Some(EnvSeed::new(seed))).unwrap();
            assert!((e.start() + e.goal()).norm() < 1e-9);
            assert!((e.start().distance(e.goal()) - 40.0).abs() < 1e-9);
            assert_eq!(e.pedestrians().len(), 30);
        }
    }

    #[test]
    fn shorter_minimum_keeps_separation() {
        let sc = SocialNavScenario { min_start_goal_dist: 25.0, ..empty() };
        for seed in 0..30 {
            let mut e = SocialNavEnv::new(sc.clone()).unwrap();
            e.reset_with(Some(EnvSeed::new(seed))).unwrap();
            assert!(e.start().distance(e.goal()) >= 25.0 - 1e-9);
        }
    }

    #[test]
    fn impossible_separation_rejected() {
        let sc = SocialNavScenario { arena_radius: 5.0, ..SocialNavScenario::default() };
        assert!(matches!(SocialNavEnv::new(sc), Err(Error::Config(_))));
    }

    #[test]
    fn seed_repeat_gives_same_crowd() {
        let mut a = SocialNavEnv::new(SocialNavScenario::default()).unwrap();
        let mut b = SocialNavEnv::new(SocialNavScenario::default()).unwrap();
        assert_eq!(
            a.reset_with(Some(EnvSeed::new(5))).unwrap(),
            b.reset_with(Some(EnvSeed::new(5))).unwrap()
        );
        assert_eq!(a.pedestrians(), b.pedestrians());
    }

    #[test]
    fn commands_are_clamped() {
        let c = RobotCommand::new(5.0, -9.0).clamped(2.0, 2.0);
        assert_eq!(c, RobotCommand::new(2.0, -2.0));
        let c = RobotCommand::new(-1.0, f64::NAN).clamped(2.0, 2.0);
        assert_eq!(c, RobotCommand::new(0.0, 0.0));
    }

    #[test]
    fn standing_still_times_out() {
        let sc = SocialNavScenario { t_max_wall: 3.0, ..empty() };
        let mut e = SocialNavEnv::new(sc).unwrap();
        e.reset_with(Some(EnvSeed::new(0))).unwrap();
        let mut n = 0;
        while !e.is_done() {
            e.step_command(RobotCommand::default()).unwrap();
            n += 1;
        }
        assert_eq!(n, 30);
        let ep = e.episode().unwrap();
        assert!(!ep.success);
        assert!(matches!(e.step_command(RobotCommand::default()), Err(Error::EpisodeTerminated)));
    }

    #[test]
    fn bands_partition_clearance() {
        assert_eq!(classify_clearance(0.30), Some(IntrusionType::Type1));
        assert_eq!(classify_clearance(0.45), Some(IntrusionType::Type2));
        assert_eq!(classify_clearance(0.80), Some(IntrusionType::Type2));
        assert_eq!(classify_clearance(1.2), Some(IntrusionType::Type2));
        assert_eq!(classify_clearance(1.5), None);
    }

    #[test]
    fn sampling_period_is_half_a_second() {
        assert_eq!(SocialNavScenario::default().sample_every(), 5);
        assert_eq!(SocialNavScenario { dt: 0.2, ..empty() }.sample_every(), 3);
        assert_eq!(SocialNavScenario { dt: 0.05, ..empty() }.sample_every(), 10);
    }

    #[test]
    fn driving_through_a_pedestrian_collides() {
        let mut e = SocialNavEnv::new(SocialNavScenario { n_pedestrians: 1, ..SocialNavScenario::default() }).unwrap();
        e.reset_with(Some(EnvSeed::new(1))).unwrap();
        let ahead = e.robot().pose.to_world(Vec2::new(1.0, 0.0));
        e.pedestrians_mut()[0].body.pose.position = ahead;
        e.pedestrians_mut()[0].goal = ahead;
        e.pedestrians_mut()[0].waypoints.clear();
        let mut hits = 0;
        for _ in 0..10 {
            let (_, ev) = e.step_command(RobotCommand::new(2.0, 0.0)).unwrap();
            hits += ev.iter().filter(|x| matches!(x, SocialNavEvent::Collision { with: Obstacle::Pedestrian(0), .. })).count();
        }
        assert!(hits >= 1);
    }

    #[test]
    fn observation_shape() {
        let mut e = SocialNavEnv::new(SocialNavScenario::default()).unwrap();
        let obs = e.reset_with(Some(EnvSeed::new(2))).unwrap();
        assert_eq!(obs.lidar.n_rays(), 72);
        assert_eq!(obs.lidar.range, 10.0);
        assert!((obs.goal_relative.x - 40.0).abs() < 1e-9 && obs.goal_relative.y.abs() < 1e-9);
    }
}
