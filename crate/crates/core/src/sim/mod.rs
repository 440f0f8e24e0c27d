//! Deterministic continuous-space kernel: bodies, fixed-step kinematics,
//! positional contact resolution and ray casting.

mod rays;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Pose, Segment, Vec2};
use crate::rng::{seeded_rng, SimRng};

pub use rays::{SensorFrame, SensorReading};

/// Bodies closer than their radii sum by more than this count as interpenetrating.
pub const PENETRATION_TOLERANCE: f64 = 1e-6;

/// Extra separation added when projecting bodies apart so that a resolved
/// contact does not register again from rounding alone.
const SEPARATION_SLOP: f64 = 1e-9;
const MAX_RESOLVE_PASSES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    Agent,
    Supply,
    Hazard,
    Pedestrian,
    Robot,
    Target,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub pose: Pose,
    pub velocity: Vec2,
    pub radius: f64,
    pub max_speed: f64,
    pub class: EntityClass,
    /// Fixed bodies never move, neither under commands nor during contact resolution.
    pub fixed: bool,
    /// Solid bodies push each other apart. Every movable body is confined by segments.
    pub solid: bool,
}

impl Body {
    pub fn new(class: EntityClass, position: Vec2, radius: f64, max_speed: f64) -> Self {
        assert!(radius > 0.0, "body radius must be positive");
        assert!(max_speed > 0.0, "max speed must be positive");
        Self {
            pose: Pose::new(position, 0.0),
            velocity: Vec2::ZERO,
            radius,
            max_speed,
            class,
            fixed: false,
            solid: true,
        }
    }

    pub fn fixed(mut self) -> Self {
        self.fixed = true;
        self.velocity = Vec2::ZERO;
        self
    }

    /// Makes the body pass through other bodies (it still senses and is sensed).
    pub fn non_solid(mut self) -> Self {
        self.solid = false;
        self
    }

    pub fn with_heading(mut self, heading: f64) -> Self {
        self.pose.heading = normalize_angle(heading);
        self
    }

    pub fn with_velocity(mut self, velocity: Vec2) -> Self {
        self.velocity = velocity.clamp_norm(self.max_speed);
        self
    }

    pub fn position(&self) -> Vec2 {
        self.pose.position
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Per-body control input for one kinematics step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Linear acceleration in m/s².
    Accelerate(Vec2),
    /// Velocity set-point, applied directly (then clamped).
    Velocity(Vec2),
    /// Differential-drive command: forward speed and yaw rate.
    Unicycle { v: f64, omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Contactee {
    Body(usize),
    Segment(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub body: usize,
    pub other: Contactee,
    pub tick: u64,
    pub time: f64,
}

/// A self-contained world: bodies, static segments, clock and randomness.
///
/// Body indices are identities for the lifetime of an episode; bodies are
/// never reordered.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub bodies: Vec<Body>,
    pub obstacles: Vec<Segment>,
    tick: u64,
    dt: f64,
    pub rng: SimRng,
}

impl WorldState {
    pub fn new(dt: f64, seed: u64) -> Self {
        Self::with_rng(dt, seeded_rng(seed))
    }

    pub fn with_rng(dt: f64, rng: SimRng) -> Self {
        assert!(dt > 0.0 && dt.is_finite(), "dt must be positive");
        Self {
            bodies: Vec::new(),
            obstacles: Vec::new(),
            tick: 0,
            dt,
            rng,
        }
    }

    pub fn add_body(&mut self, body: Body) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Simulated seconds; always exactly `tick · dt`.
    pub fn clock(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    /// Advances the clock by one `dt` without touching bodies.
    pub fn advance_clock(&mut self) {
        self.tick += 1;
    }

    /// Semi-implicit Euler step: velocities first, then positions.
    ///
    /// Uncommanded movable bodies keep their velocity. Commands addressed to
    /// fixed bodies are ignored.
    pub fn step_kinematics(&mut self, commands: &[(usize, Command)]) -> Result<()> {
        let n = self.bodies.len();
        if let Some(&(index, _)) = commands.iter().find(|(i, _)| *i >= n) {
            return Err(Error::BodyIndex { index, len: n });
        }
        let dt = self.dt;
        let mut per_body: Vec<Option<Command>> = vec![None; n];
        for &(i, c) in commands {
            per_body[i] = Some(c);
        }
        for (body, cmd) in self.bodies.iter_mut().zip(per_body) {
            if body.fixed {
                continue;
            }
            match cmd {
                None => {}
                Some(Command::Accelerate(a)) => body.velocity += a * dt,
                Some(Command::Velocity(v)) => body.velocity = v,
                Some(Command::Unicycle { v, omega }) => {
                    body.pose.heading = normalize_angle(body.pose.heading + omega * dt);
                    body.velocity = body.pose.forward() * v;
                }
            }
            body.velocity = body.velocity.clamp_norm(body.max_speed);
            body.pose.position += body.velocity * dt;
            body.pose.heading = normalize_angle(body.pose.heading);
        }
        self.tick += 1;
        Ok(())
    }

    /// Projects interpenetrating bodies apart (no restitution) and reports one
    /// event per distinct contact pair.
    pub fn resolve_collisions(&mut self) -> Vec<ContactEvent> {
        let mut contacts: BTreeSet<(usize, Contactee)> = BTreeSet::new();
        let n = self.bodies.len();
        for _ in 0..MAX_RESOLVE_PASSES {
            let mut moved = false;
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (&self.bodies[i], &self.bodies[j]);
                    if !(a.solid && b.solid) || (a.fixed && b.fixed) {
                        continue;
                    }
                    let delta = b.position() - a.position();
                    let dist = delta.norm();
                    let overlap = a.radius + b.radius - dist;
                    if overlap <= 0.0 {
                        continue;
                    }
                    let normal = delta
                        .normalized()
                        .unwrap_or_else(|| Vec2::from_angle(i as f64 * 2.399_963 + j as f64));
                    let push = overlap + SEPARATION_SLOP;
                    let (wa, wb) = match (a.fixed, b.fixed) {
                        (true, false) => (0.0, 1.0),
                        (false, true) => (1.0, 0.0),
                        _ => (0.5, 0.5),
                    };
                    self.bodies[i].pose.position -= normal * (push * wa);
                    self.bodies[j].pose.position += normal * (push * wb);
                    contacts.insert((i, Contactee::Body(j)));
                    moved = true;
                }
            }
            for i in 0..n {
                if self.bodies[i].fixed {
                    continue;
                }
                for (k, seg) in self.obstacles.iter().enumerate() {
                    let body = &self.bodies[i];
                    let p = body.position();
                    let closest = seg.closest_point(p);
                    let delta = p - closest;
                    let dist = delta.norm();
                    let overlap = body.radius - dist;
                    if overlap <= 0.0 {
                        continue;
                    }
                    let normal = delta.normalized().unwrap_or_else(|| {
                        (seg.b - seg.a).perp().normalized().unwrap_or(Vec2::new(1.0, 0.0))
                    });
                    self.bodies[i].pose.position += normal * (overlap + SEPARATION_SLOP);
                    contacts.insert((i, Contactee::Segment(k)));
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        let (tick, time) = (self.tick, self.clock());
        contacts
            .into_iter()
            .map(|(body, other)| ContactEvent {
                body,
                other,
                tick,
                time,
            })
            .collect()
    }

    /// Smallest `distance − (r_a + r_b)` over solid body pairs (positive when separated).
    pub fn min_pair_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.bodies.iter().enumerate() {
            for b in &self.bodies[i + 1..] {
                if a.solid && b.solid {
                    best = best.min(a.position().distance(b.position()) - a.radius - b.radius);
                }
            }
        }
        best
    }

    /// Distance from `p` to the nearest static segment.
    pub fn obstacle_distance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }
}
