//! Multi-agent cooperative search.
//!
//! Agents thrust around a walled arena sensing their surroundings through a
//! radial ray array. A supply is captured only when at least `n_coop`
//! agents touch it in the same step; hazards drift randomly and penalize
//! whoever bumps into them. Every event reward is split: a `local_ratio`
//! share goes to the agents involved, the rest is spread over the team.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Transition};
use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::rng::{unit_vector, EnvSeed, SimRng};
use crate::sim::{Body, Command, Contactee, EntityClass, SensorFrame, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacsConfig {
    pub n_agents: usize,
    pub n_supplies: usize,
    pub n_hazards: usize,
    pub n_coop: usize,
    pub n_sensors: usize,
    /// Sensing range in meters; written in centimeters in config files.
    #[serde(with = "crate::units::centimeters")]
    pub sensor_range: f64,
    pub max_cycles: u32,
    pub supply_reward: f64,
    pub hazard_reward: f64,
    pub encounter_reward: f64,
    pub thrust_penalty: f64,
    pub local_ratio: f64,

    /// Side of the square arena, meters.
    pub arena_size: f64,
    /// Random rectangular obstacles inside the arena.
    pub n_obstacles: usize,
    pub agent_radius: f64,
    pub supply_radius: f64,
    pub hazard_radius: f64,
    /// Acceleration produced by a unit thrust component, m/s².
    pub thrust_gain: f64,
    pub agent_max_speed: f64,
    /// Hazards pick a new random velocity every this many steps.
    pub hazard_resample_steps: u32,
    pub dt: f64,
}

impl Default for MacsConfig {
    fn default() -> Self {
        Self {
            n_agents: 5,
            n_supplies: 10,
            n_hazards: 10,
            n_coop: 2,
            n_sensors: 30,
            sensor_range: 5.0,
            max_cycles: 500,
            supply_reward: 10.0,
            hazard_reward: -1.0,
            encounter_reward: 0.01,
            thrust_penalty: -0.01,
            local_ratio: 0.9,
            arena_size: 20.0,
            n_obstacles: 4,
            agent_radius: 0.3,
            supply_radius: 0.4,
            hazard_radius: 0.4,
            thrust_gain: 2.0,
            agent_max_speed: 1.5,
            hazard_resample_steps: 10,
            dt: 0.2,
        }
    }
}

impl MacsConfig {
    /// Checks hard invariants; returns soft warnings for legal but degenerate settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: &str| Err(Error::Config(format!("macs: {m}")));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1");
        }
        if self.n_coop == 0 {
            return bad("n_coop must be at least 1");
        }
        if self.n_sensors == 0 {
            return bad("n_sensors must be at least 1");
        }
        if !(self.sensor_range > 0.0) {
            return bad("sensor_range must be positive");
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.local_ratio) {
            return bad("local_ratio must lie in [0, 1]");
        }
        for (name, v) in [
            ("arena_size", self.arena_size),
            ("agent_radius", self.agent_radius),
            ("supply_radius", self.supply_radius),
            ("hazard_radius", self.hazard_radius),
            ("thrust_gain", self.thrust_gain),
            ("agent_max_speed", self.agent_max_speed),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        let mut warnings = Vec::new();
        if self.n_coop > self.n_agents {
            warnings.push(format!(
                "n_coop = {} exceeds n_agents = {}: no supply can ever be captured",
                self.n_coop, self.n_agents
            ));
        }
        Ok(warnings)
    }
}

/// Thrust command for one agent; components are clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacsAction {
    pub thrust: Vec2,
}

impl MacsAction {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            thrust: Vec2::new(x, y),
        }
    }

    /// The action as applied: non-finite components become 0, the rest clamp to `[-1, 1]`.
    pub fn clamped(self) -> Vec2 {
        let c = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
        Vec2::new(c(self.thrust.x), c(self.thrust.y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacsObs {
    pub sensors: SensorFrame,
    pub own_velocity: Vec2,
    pub touching_supply: bool,
    pub touching_hazard: bool,
}

/// Sensor classes in the one-hot encoding, in order.
pub const SENSED_CLASSES: [EntityClass; 4] = [
    EntityClass::Agent,
    EntityClass::Supply,
    EntityClass::Hazard,
    EntityClass::Obstacle,
];

impl MacsObs {
    /// Flat feature vector: per ray `[distance / range, one-hot(4), relative_speed]`,
    /// then `[vx, vy, touching_supply, touching_hazard]`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sensors.n_rays() * 6 + 4);
        for r in &self.sensors.readings {
            out.push(r.distance / self.sensors.range);
            for class in SENSED_CLASSES {
                out.push(if r.hit == Some(class) { 1.0 } else { 0.0 });
            }
            out.push(r.relative_speed);
        }
        out.extend([
            self.own_velocity.x,
            self.own_velocity.y,
            self.touching_supply as u8 as f64,
            self.touching_hazard as u8 as f64,
        ]);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    Capture { supply: usize },
    Encounter { supply: usize },
    Hazard { hazard: usize },
}

/// One rewarded event and how its value was distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: RewardKind,
    pub value: f64,
    /// Agents that caused the event.
    pub involved: Vec<usize>,
    /// Amount credited to every agent; sums to `value`.
    pub credits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentReward {
    pub local: f64,
    pub global_share: f64,
    pub thrust: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub per_agent: Vec<AgentReward>,
    pub events: Vec<RewardEvent>,
}

impl RewardBreakdown {
    pub fn totals(&self) -> Vec<f64> {
        self.per_agent.iter().map(|r| r.total).collect()
    }
}

/// Splits `value` among `n_agents`: `local_ratio · value / |involved|` to each
/// involved agent plus `(1 − local_ratio) · value / n_agents` to everyone.
/// Returns `(local, global)` per agent.
pub fn split_reward(value: f64, involved: &[usize], n_agents: usize, local_ratio: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, (1.0 - local_ratio) * value / n_agents as f64); n_agents];
    if !involved.is_empty() {
        let local = local_ratio * value / involved.len() as f64;
        for &a in involved {
            out[a].0 += local;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacsEnv {
    config: MacsConfig,
    world: WorldState,
    obstacle_rects: Vec<Rect>,
    supply_active: Vec<bool>,
    hazard_contacts: BTreeSet<(usize, usize)>,
    steps: u32,
    done: bool,
    last_thrust: Vec<Vec2>,
}

impl MacsEnv {
    pub fn new(config: MacsConfig) -> Result<Self> {
        for w in config.validate()? {
            log::warn!("{w}");
        }
        let dt = config.dt;
        Ok(Self {
            config,
            world: WorldState::new(dt, 0),
            obstacle_rects: Vec::new(),
            supply_active: Vec::new(),
            hazard_contacts: BTreeSet::new(),
            steps: 0,
            done: true,
            last_thrust: Vec::new(),
        })
    }

    pub fn config(&self) -> &MacsConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn agent_index(&self, a: usize) -> usize {
        a
    }

    pub fn supply_index(&self, s: usize) -> usize {
        self.config.n_agents + s
    }

    pub fn hazard_index(&self, h: usize) -> usize {
        self.config.n_agents + self.config.n_supplies + h
    }

    pub fn supply_active(&self, s: usize) -> bool {
        self.supply_active.get(s).copied().unwrap_or(false)
    }

    pub fn supplies_remaining(&self) -> usize {
        self.supply_active.iter().filter(|&&a| a).count()
    }

    pub fn obstacle_rects(&self) -> &[Rect] {
        &self.obstacle_rects
    }

    /// Mutable access for scripted scenarios and tests.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn reset_with(&mut self, seed: Option<EnvSeed>) -> Result<Vec<MacsObs>> {
        let rng = match seed {
            Some(s) => s.rng(),
            None => self.world.rng.clone(),
        };
        let cfg = &self.config;
        let mut world = WorldState::with_rng(cfg.dt, rng);
        let arena = Rect::new(Vec2::ZERO, Vec2::new(cfg.arena_size, cfg.arena_size));
        world.obstacles.extend(arena.edges());

        let mut rects = Vec::new();
        for _ in 0..cfg.n_obstacles {
            let w: f64 = world.rng.random_range(1.0..3.0);
            let h: f64 = world.rng.random_range(1.0..3.0);
            let margin = 2.0;
            if cfg.arena_size - 2.0 * margin <= w.max(h) {
                break;
            }
            let x = world.rng.random_range(margin..cfg.arena_size - margin - w);
            let y = world.rng.random_range(margin..cfg.arena_size - margin - h);
            let r = Rect::new(Vec2::new(x, y), Vec2::new(x + w, y + h));
            world.obstacles.extend(r.edges());
            rects.push(r);
        }

        let spec = [
            (EntityClass::Agent, cfg.n_agents, cfg.agent_radius),
            (EntityClass::Supply, cfg.n_supplies, cfg.supply_radius),
            (EntityClass::Hazard, cfg.n_hazards, cfg.hazard_radius),
        ];
        for (class, count, radius) in spec {
            for _ in 0..count {
                let p = place(&mut world, &rects, arena, radius)?;
                let body = match class {
                    EntityClass::Agent => Body::new(class, p, radius, cfg.agent_max_speed),
                    EntityClass::Supply => Body::new(class, p, radius, 1.0).fixed().non_solid(),
                    _ => {
                        let mut b = Body::new(class, p, radius, 0.5 * cfg.agent_max_speed).non_solid();
                        b.velocity = hazard_velocity(&mut world.rng, b.max_speed);
                        b
                    }
                };
                world.add_body(body);
            }
        }

        self.world = world;
        self.obstacle_rects = rects;
        self.supply_active = vec![true; cfg.n_supplies];
        self.hazard_contacts = self.current_hazard_contacts();
        self.steps = 0;
        self.done = cfg.n_supplies == 0;
        self.last_thrust = vec![Vec2::ZERO; cfg.n_agents];
        Ok(self.observations())
    }

    pub fn step_agents(&mut self, actions: &[MacsAction]) -> Result<(Vec<MacsObs>, RewardBreakdown, Vec<bool>)> {
        let n = self.config.n_agents;
        if actions.len() != n {
            return Err(Error::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        let thrusts: Vec<Vec2> = actions.iter().map(|a| a.clamped()).collect();

        let mut commands: Vec<(usize, Command)> = thrusts
            .iter()
            .enumerate()
            .map(|(i, t)| (i, Command::Accelerate(*t * self.config.thrust_gain)))
            .collect();
        if self.config.hazard_resample_steps > 0 && (self.steps + 1).is_multiple_of(self.config.hazard_resample_steps) {
            for h in 0..self.config.n_hazards {
                let idx = self.hazard_index(h);
                let v = hazard_velocity(&mut self.world.rng, self.world.bodies[idx].max_speed);
                commands.push((idx, Command::Velocity(v)));
            }
        }
        self.world.step_kinematics(&commands)?;
        let contacts = self.world.resolve_collisions();
        self.bounce_hazards(&contacts);
        self.steps += 1;

        let tick = self.world.tick();
        let mut events = Vec::new();
        for s in 0..self.config.n_supplies {
            if !self.supply_active[s] {
                continue;
            }
            let touching = self.agents_touching(self.supply_index(s));
            if touching.len() >= self.config.n_coop {
                self.supply_active[s] = false;
                events.push(self.make_event(tick, RewardKind::Capture { supply: s }, self.config.supply_reward, touching));
            } else {
                for a in touching {
                    events.push(self.make_event(
                        tick,
                        RewardKind::Encounter { supply: s },
                        self.config.encounter_reward,
                        vec![a],
                    ));
                }
            }
        }
        let contacts_now = self.current_hazard_contacts();
        for &(a, h) in contacts_now.difference(&self.hazard_contacts) {
            events.push(self.make_event(tick, RewardKind::Hazard { hazard: h }, self.config.hazard_reward, vec![a]));
        }
        self.hazard_contacts = contacts_now;

        let mut per_agent = vec![AgentReward::default(); n];
        for ev in &events {
            for (a, (local, global)) in split_reward(ev.value, &ev.involved, n, self.config.local_ratio)
                .into_iter()
                .enumerate()
            {
                per_agent[a].local += local;
                per_agent[a].global_share += global;
            }
        }
        for (r, t) in per_agent.iter_mut().zip(&thrusts) {
            r.thrust = self.config.thrust_penalty * t.norm_sq();
            r.total = r.local + r.global_share + r.thrust;
        }
        self.last_thrust = thrusts;

        self.done = self.supplies_remaining() == 0 || self.steps >= self.config.max_cycles;
        let obs = self.observations();
        Ok((obs, RewardBreakdown { per_agent, events }, vec![self.done; n]))
    }

    fn make_event(&self, tick: u64, kind: RewardKind, value: f64, involved: Vec<usize>) -> RewardEvent {
        let credits = split_reward(value, &involved, self.config.n_agents, self.config.local_ratio)
            .into_iter()
            .map(|(l, g)| l + g)
            .collect();
        RewardEvent {
            tick,
            kind,
            value,
            involved,
            credits,
        }
    }

    fn touching(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.world.bodies[a], &self.world.bodies[b]);
        x.position().distance(y.position()) <= x.radius + y.radius
    }

    fn agents_touching(&self, body: usize) -> Vec<usize> {
        (0..self.config.n_agents).filter(|&a| self.touching(a, body)).collect()
    }

    fn current_hazard_contacts(&self) -> BTreeSet<(usize, usize)> {
        let mut set = BTreeSet::new();
        for a in 0..self.config.n_agents {
            for h in 0..self.config.n_hazards {
                if self.touching(a, self.hazard_index(h)) {
                    set.insert((a, h));
                }
            }
        }
        set
    }

    /// Reflects a hazard's velocity off any wall it was projected away from.
    fn bounce_hazards(&mut self, contacts: &[crate::sim::ContactEvent]) {
        let first = self.hazard_index(0);
        for c in contacts {
            if c.body < first {
                continue;
            }
            if let Contactee::Segment(k) = c.other {
                let seg = self.world.obstacles[k];
                let body = &mut self.world.bodies[c.body];
                if let Some(n) = (body.position() - seg.closest_point(body.position())).normalized() {
                    let vn = body.velocity.dot(n);
                    if vn < 0.0 {
                        body.velocity -= n * (2.0 * vn);
                    }
                }
            }
        }
    }

    pub fn observations(&self) -> Vec<MacsObs> {
        let active = |i: usize| {
            let s0 = self.config.n_agents;
            !(s0..s0 + self.config.n_supplies).contains(&i) || self.supply_active[i - s0]
        };
        (0..self.config.n_agents)
            .map(|a| {
                let sensors = self.world.cast_rays_filtered(
                    a,
                    self.config.n_sensors,
                    self.config.sensor_range,
                    |i, _| active(i),
                );
                MacsObs {
                    sensors,
                    own_velocity: self.world.bodies[a].velocity,
                    touching_supply: (0..self.config.n_supplies)
                        .any(|s| self.supply_active[s] && self.touching(a, self.supply_index(s))),
                    touching_hazard: (0..self.config.n_hazards).any(|h| self.touching(a, self.hazard_index(h))),
                }
            })
            .collect()
    }
}

fn hazard_velocity(rng: &mut SimRng, max_speed: f64) -> Vec2 {
    let speed = rng.random_range(0.0..=max_speed);
    unit_vector(rng) * speed
}

/// Uniform free position: clear of walls, outside obstacle rectangles and
/// not overlapping previously placed bodies.
fn place(world: &mut WorldState, rects: &[Rect], arena: Rect, radius: f64) -> Result<Vec2> {
    let gap = 0.05;
    for _ in 0..2000 {
        let p = Vec2::new(
            world.rng.random_range(arena.min.x + radius..arena.max.x - radius),
            world.rng.random_range(arena.min.y + radius..arena.max.y - radius),
        );
        if world.obstacle_distance(p) < radius + gap || rects.iter().any(|r| r.contains(p)) {
            continue;
        }
        if world
            .bodies
            .iter()
            .any(|b| b.position().distance(p) < b.radius + radius + gap)
        {
            continue;
        }
        return Ok(p);
    }
    Err(Error::Config("macs: arena too small to place every entity".into()))
}

impl Environment for MacsEnv {
    type Observation = Vec<MacsObs>;
    type Action = Vec<MacsAction>;

    fn reset(&mut self, seed: Option<EnvSeed>) -> Result<Vec<MacsObs>> {
        self.reset_with(seed)
    }

    fn step(&mut self, action: Vec<MacsAction>) -> Result<Transition<Vec<MacsObs>>> {
        let (observation, rewards, dones) = self.step_agents(&action)?;
        Ok(Transition {
            observation,
            rewards: rewards.totals(),
            done: dones.iter().all(|&d| d),
        })
    }
}
