//! Baseline policies for every task.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dwa::{dwa_control, DwaParams};
use super::local::carrot;
use super::mppi::{Mppi, MppiParams};
use super::{astar_world, Path};
use crate::envs::exploration::ExplorationAction;
use crate::envs::macs::{MacsAction, MacsObs};
use crate::envs::{ExplorationEnv, MacsEnv, RobotCommand, RobotObs, SocialNavEnv};
use crate::error::Result;
use crate::geom::{normalize_angle, Rect, Vec2};
use crate::grid::clearance_grid;
use crate::rng::{gaussian, SimRng};
use crate::sim::{EntityClass, WorldState};

/// One i.i.d. uniform `[-1, 1]²` thrust per agent.
pub fn random_macs_actions(n_agents: usize, rng: &mut SimRng) -> Vec<MacsAction> {
    (0..n_agents)
        .map(|_| MacsAction::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
        .collect()
}

/// Uniform command over `[0, v_max] × [−ω_max, ω_max]`.
pub fn random_robot_command(v_max: f64, omega_max: f64, rng: &mut SimRng) -> RobotCommand {
    RobotCommand::new(rng.random_range(0.0..=v_max), rng.random_range(-omega_max..=omega_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreedyParams {
    /// Thrust magnitude when steering toward a target.
    pub thrust: f64,
    /// Hazard rays closer than this push the agent away.
    pub hazard_radius: f64,
    pub hazard_gain: f64,
    /// Walls closer than this push the agent away.
    pub wall_radius: f64,
    /// Velocity damping while steering.
    pub damping: f64,
    /// Heading jitter of the exploration random walk, rad per step.
    pub wander_std: f64,
    pub wander_thrust: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self {
            thrust: 0.6,
            hazard_radius: 1.5,
            hazard_gain: 1.0,
            wall_radius: 0.8,
            damping: 0.5,
            wander_std: 0.3,
            wander_thrust: 0.4,
        }
    }
}

/// Scripted cooperative baseline for the search task.
///
/// Agents pair up in index order (0–1, 2–3, …; an odd last agent works
/// alone). The pair leader picks its nearest sensed supply and both members
/// steer to it. Hazards sensed within `hazard_radius` add repulsion; with no
/// supply in sight each agent random-walks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyCoop {
    pub params: GreedyParams,
    wander: Vec<f64>,
}

impl GreedyCoop {
    pub fn new(params: GreedyParams) -> Self {
        Self {
            params,
            wander: Vec::new(),
        }
    }

    /// Leader-relative offset of the nearest supply the leader senses.
    pub fn nearest_supply(obs: &MacsObs) -> Option<Vec2> {
        obs.sensors
            .readings
            .iter()
            .enumerate()
            .filter(|(_, r)| r.hit == Some(EntityClass::Supply))
            .min_by(|a, b| a.1.distance.total_cmp(&b.1.distance))
            .map(|(k, r)| Vec2::from_angle(obs.sensors.ray_angle(k)) * r.distance)
    }

    /// Sum of repulsions from nearby hazards and walls.
    pub fn avoidance(&self, obs: &MacsObs) -> Vec2 {
        let p = &self.params;
        let mut push = Vec2::ZERO;
        for (k, r) in obs.sensors.readings.iter().enumerate() {
            let dir = Vec2::from_angle(obs.sensors.ray_angle(k));
            let reach = match r.hit {
                Some(EntityClass::Hazard) => p.hazard_radius,
                Some(EntityClass::Obstacle) => p.wall_radius,
                _ => continue,
            };
            if r.distance < reach {
                push -= dir * (p.hazard_gain * (reach - r.distance) / reach);
            }
        }
        push
    }

    pub fn act(&mut self, env: &MacsEnv, obs: &[MacsObs], rng: &mut SimRng) -> Vec<MacsAction> {
        let n = obs.len();
        if self.wander.len() != n {
            self.wander = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        }
        let pos = |i: usize| env.world().bodies[i].position();
        let p = self.params.clone();
        (0..n)
            .map(|i| {
                let leader = i - i % 2;
                let target = Self::nearest_supply(&obs[leader]).map(|rel| pos(leader) + rel);
                let drive = match target {
                    Some(t) => {
                        let want = (t - pos(i)).normalized().unwrap_or(Vec2::ZERO);
                        (want - obs[i].own_velocity * (p.damping / env.config().agent_max_speed))
                            .normalized()
                            .unwrap_or(Vec2::ZERO)
                            * p.thrust
                    }
                    None => {
                        self.wander[i] = normalize_angle(self.wander[i] + gaussian(rng) * p.wander_std);
                        Vec2::from_angle(self.wander[i]) * p.wander_thrust
                    }
                };
                let u = (drive + self.avoidance(&obs[i])).clamp_norm(1.0);
                MacsAction { thrust: u }
            })
            .collect()
    }
}

/// Scripted exploration baseline: head for the closest remaining paper.
pub fn nearest_paper_action(env: &ExplorationEnv) -> ExplorationAction {
    let here = env.pose().position;
    match env
        .papers()
        .into_iter()
        .min_by(|a, b| a.distance(here).total_cmp(&b.distance(here)))
    {
        Some(target) => ExplorationAction::MoveTo { target },
        None => ExplorationAction::RotateTo {
            heading: env.pose().heading,
        },
    }
}

/// Global A* route for the robot over the static arena, on a grid inflated
/// by the robot radius.
pub fn global_path(env: &SocialNavEnv, cell: f64) -> Result<Path> {
    let sc = env.scenario();
    let mut world = WorldState::new(sc.dt, 0);
    world.obstacles = env.walls().to_vec();
    let r = sc.arena_radius + sc.wall_margin;
    let bounds = Rect::new(Vec2::new(-r, -r), Vec2::new(r, r));
    let grid = clearance_grid(&world, cell, bounds, sc.robot_radius);
    let mut path = astar_world(&grid, env.start(), env.goal())?;
    // Anchor the ends on the true start and goal rather than their cell centers.
    if let Some(first) = path.waypoints.first_mut() {
        *first = env.start();
    }
    if let Some(last) = path.waypoints.last_mut() {
        *last = env.goal();
    }
    path.total_length = path.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Cruise speed, below the robot's limit.
    pub speed: f64,
    /// Pedestrians predicted closer than this (surface clearance) are avoided.
    pub clearance: f64,
    pub horizon: f64,
    pub lookahead: f64,
    /// Heading offsets tried on each side, in steps of `heading_step`.
    pub heading_steps: usize,
    pub heading_step: f64,
    pub turn_gain: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            speed: 1.2,
            clearance: 1.2,
            horizon: 2.0,
            lookahead: 3.0,
            heading_steps: 12,
            heading_step: PI / 12.0,
            turn_gain: 3.0,
        }
    }
}

/// Privileged scripted "teleoperator": knows every pedestrian's position and
/// velocity, follows the A* route at reduced speed and picks the heading
/// closest to the route whose constant-velocity prediction keeps personal
/// space.
pub fn oracle_command(env: &SocialNavEnv, path: &Path, p: &OracleParams) -> RobotCommand {
    let sc = env.scenario();
    let robot = env.robot();
    let pose = robot.pose;
    let target = carrot(path, pose.position, p.lookahead);
    let to_target = (target - pose.position).angle();

    let predicted_clearance = |heading: f64, speed: f64| -> f64 {
        let steps = (p.horizon / 0.25).round() as usize;
        let v = Vec2::from_angle(heading) * speed;
        let mut worst = f64::INFINITY;
        for k in 0..=steps {
            let t = k as f64 * 0.25;
            let me = pose.position + v * t;
            for ped in env.pedestrians() {
                let q = ped.position() + ped.body.velocity * t;
                worst = worst.min(me.distance(q) - robot.radius - ped.body.radius);
            }
        }
        worst
    };

    let remaining = pose.position.distance(env.goal());
    let cruise = p.speed.min(remaining / sc.dt).min(sc.v_max);
    let mut best: Option<(f64, f64, f64)> = None;
    'search: for speed in [cruise, 0.5 * cruise] {
        for k in 0..=2 * p.heading_steps {
            let offset = if k == 0 {
                0.0
            } else {
                let m = k.div_ceil(2) as f64 * p.heading_step;
                if k % 2 == 1 { m } else { -m }
            };
            if offset.abs() > PI {
                continue;
            }
            let h = to_target + offset;
            let c = predicted_clearance(h, speed);
            if c >= p.clearance {
                best = Some((h, speed, c));
                break 'search;
            }
            if best.is_none_or(|b| c > b.2) {
                best = Some((h, speed, c));
            }
        }
    }
    let stay = predicted_clearance(pose.heading, 0.0);
    let (heading, mut speed, c) = best.expect("at least one candidate");
    if c < p.clearance && stay > c {
        speed = 0.0;
    }
    let err = normalize_angle(heading - pose.heading);
    let omega = (p.turn_gain * err).clamp(-sc.omega_max, sc.omega_max);
    let v = if err.abs() < 0.6 { speed * err.cos() } else { 0.0 };
    RobotCommand::new(v, omega)
}

/// Which controller drives the robot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NavController {
    Dwa(DwaParams),
    Mppi(Box<Mppi>),
    Oracle(OracleParams),
    Random,
}

/// Global A* plus a local controller, re-planned on every reset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavAgent {
    pub controller: NavController,
    pub path_cell: f64,
    path: Option<Path>,
    /// Recovery spins issued by DWA in the current episode.
    pub recoveries: u32,
}

impl NavAgent {
    pub fn new(controller: NavController) -> Self {
        Self {
            controller,
            path_cell: 0.5,
            path: None,
            recoveries: 0,
        }
    }

    pub fn dwa() -> Self {
        Self::new(NavController::Dwa(DwaParams::default()))
    }

    pub fn mppi() -> Result<Self> {
        Ok(Self::new(NavController::Mppi(Box::new(Mppi::new(MppiParams::default())?))))
    }

    pub fn oracle() -> Self {
        Self::new(NavController::Oracle(OracleParams::default()))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_ref()
    }

    pub fn reset(&mut self, env: &SocialNavEnv) -> Result<()> {
        self.path = Some(global_path(env, self.path_cell)?);
        self.recoveries = 0;
        if let NavController::Mppi(m) = &mut self.controller {
            m.reset();
        }
        Ok(())
    }

    pub fn act(&mut self, env: &SocialNavEnv, obs: &RobotObs, rng: &mut SimRng) -> Result<RobotCommand> {
        if self.path.is_none() {
            self.reset(env)?;
        }
        let path = self.path.as_ref().expect("planned above");
        let sc = env.scenario();
        Ok(match &mut self.controller {
            NavController::Dwa(p) => {
                let d = dwa_control(obs.pose, obs.velocity, path, &obs.lidar, p);
                if d.recovery {
                    self.recoveries += 1;
                }
                d.command
            }
            NavController::Mppi(m) => m.control(obs.pose, obs.velocity, path, &obs.lidar, rng).command,
            NavController::Oracle(p) => oracle_command(env, path, p),
            NavController::Random => random_robot_command(sc.v_max, sc.omega_max, rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MacsConfig;
    use crate::rng::{seeded_rng, EnvSeed};
    use crate::sim::{SensorFrame, SensorReading};

    #[test]
    fn random_thrust_is_uniform_and_seeded() {
        let mut rng = seeded_rng(0);
        let mut sum = Vec2::ZERO;
        let n = 100_000 / 5;
        for _ in 0..n {
            for a in random_macs_actions(5, &mut rng) {
                assert!(a.thrust.x.abs() <= 1.0 && a.thrust.y.abs() <= 1.0);
                sum += a.thrust;
            }
        }
        let mean = sum / (n * 5) as f64;
        assert!(mean.x.abs() <= 0.02 && mean.y.abs() <= 0.02, "{mean:?}");
        assert_eq!(random_macs_actions(5, &mut seeded_rng(3)), random_macs_actions(5, &mut seeded_rng(3)));
    }

    fn frame_with(hits: &[(usize, EntityClass, f64)]) -> MacsObs {
        let mut readings = vec![
            SensorReading { distance: 5.0, hit: None, relative_speed: 0.0, body: None };
            30
        ];
        for &(k, class, d) in hits {
            readings[k] = SensorReading { distance: d, hit: Some(class), relative_speed: 0.0, body: None };
        }
        MacsObs {
            sensors: SensorFrame { range: 5.0, origin_heading: 0.0, readings },
            own_velocity: Vec2::ZERO,
            touching_supply: false,
            touching_hazard: false,
        }
    }

    #[test]
    fn pair_steers_at_leaders_supply() {
        let mut env = MacsEnv::new(MacsConfig { n_agents: 2, ..MacsConfig::default() }).unwrap();
        env.reset_with(Some(EnvSeed::new(0))).unwrap();
        let shared = env.world().bodies[0].position();
        env.world_mut().bodies[1].pose.position = shared;
        let obs = vec![frame_with(&[(0, EntityClass::Supply, 3.0)]), frame_with(&[])];
        let mut g = GreedyCoop::new(GreedyParams::default());
        let acts = g.act(&env, &obs, &mut seeded_rng(0));
        for a in acts {
            let dir = a.thrust.normalized().unwrap();
            assert!((dir.x - 1.0).abs() < 1e-12 && dir.y.abs() < 1e-12, "{dir:?}");
        }
    }

    #[test]
    fn hazard_pushes_away() {
        let g = GreedyCoop::new(GreedyParams::default());
        let push = g.avoidance(&frame_with(&[(0, EntityClass::Hazard, 0.5)]));
        assert!(push.x < 0.0 && push.y.abs() < 1e-12);
        assert_eq!(g.avoidance(&frame_with(&[(0, EntityClass::Hazard, 2.0)])), Vec2::ZERO);
    }

    #[test]
    fn global_path_joins_start_and_goal() {
        let mut env = SocialNavEnv::new(Default::default()).unwrap();
        env.reset_with(Some(EnvSeed::new(0))).unwrap();
        let path = global_path(&env, 0.5).unwrap();
        assert_eq!(path.waypoints[0], env.start());
        assert_eq!(*path.waypoints.last().unwrap(), env.goal());
        // Octile routes are at most ~8.3% longer than the straight line.
        assert!(path.total_length <= 40.0 * 1.0824 + 1.0);
    }
}
