//! Social-force pedestrian crowd.
//!
//! Each pedestrian relaxes toward its desired velocity and is pushed away
//! from neighbors and walls by exponential repulsion:
//!
//! ```text
//! F = (v_desired · ê_goal − v) / τ
//!   + Σ_j A · exp((r_ij − d_ij) / B) · n̂_ji
//!   + Σ_w A_obs · exp((r_i − d_iw) / B_obs) · n̂_wi
//!   + noise
//! ```
//!
//! Goals come from A*-connected waypoint chains sampled uniformly over the
//! free region reachable from the pedestrian, so the crowd keeps wandering
//! indefinitely.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Segment, Vec2};
use crate::grid::GridMap;
use crate::planners::astar;
use crate::rng::{gaussian_vec, unit_vector, SimRng};
use crate::sim::{Body, EntityClass, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfmParams {
    /// Pedestrian–pedestrian repulsion strength `A`, m/s².
    pub social_strength: f64,
    /// Pedestrian–pedestrian repulsion range `B`, m.
    pub social_range: f64,
    pub obstacle_strength: f64,
    pub obstacle_range: f64,
    /// Relaxation time `τ`, s.
    pub relaxation_time: f64,
    /// Standard deviation of the per-axis Gaussian force noise, m/s².
    pub noise_std: f64,
    pub desired_speed: f64,
    pub max_speed: f64,
    pub radius: f64,
    /// A waypoint within this distance counts as reached.
    pub waypoint_radius: f64,
    /// Number of uniformly sampled goals chained per waypoint refill.
    pub goals_per_refill: usize,
}

impl Default for SfmParams {
    fn default() -> Self {
        Self {
            social_strength: 5.0,
            social_range: 0.3,
            obstacle_strength: 10.0,
            obstacle_range: 0.2,
            relaxation_time: 0.5,
            noise_std: 0.1,
            desired_speed: 1.34,
            max_speed: 1.8,
            radius: 0.3,
            waypoint_radius: 0.3,
            goals_per_refill: 2,
        }
    }
}

impl SfmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("social_strength", self.social_strength),
            ("social_range", self.social_range),
            ("obstacle_strength", self.obstacle_strength),
            ("obstacle_range", self.obstacle_range),
            ("relaxation_time", self.relaxation_time),
            ("desired_speed", self.desired_speed),
            ("max_speed", self.max_speed),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("sfm.{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("sfm.noise_std must be non-negative".into()));
        }
        if self.desired_speed > self.max_speed {
            return Err(Error::Config("sfm.desired_speed exceeds sfm.max_speed".into()));
        }
        if self.goals_per_refill == 0 {
            return Err(Error::Config("sfm.goals_per_refill must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub body: Body,
    pub desired_speed: f64,
    /// Current steering target.
    pub goal: Vec2,
    pub relaxation_time: f64,
    /// Targets to visit after `goal`.
    pub waypoints: VecDeque<Vec2>,
}

impl Pedestrian {
    pub fn new(position: Vec2, params: &SfmParams) -> Self {
        Self {
            body: Body::new(EntityClass::Pedestrian, position, params.radius, params.max_speed),
            desired_speed: params.desired_speed,
            goal: position,
            relaxation_time: params.relaxation_time,
            waypoints: VecDeque::new(),
        }
    }

    pub fn position(&self) -> Vec2 {
        self.body.position()
    }

    fn set_route(&mut self, route: Vec<Vec2>) {
        let mut q: VecDeque<Vec2> = route.into();
        if let Some(first) = q.pop_front() {
            self.goal = first;
        }
        self.waypoints = q;
    }
}

/// Exponential repulsion on a body at `p` (radius sum `r`) from a point at distance `d` along `away`.
fn repulsion(strength: f64, range: f64, r: f64, d: f64, away: Vec2) -> Vec2 {
    away * (strength * ((r - d) / range).exp())
}

/// Total social-force acceleration on `ped`.
///
/// Coincident centers get a repulsion direction drawn uniformly from the
/// unit circle.
pub fn sfm_force<'a>(
    ped: &Pedestrian,
    neighbors: impl IntoIterator<Item = &'a Body>,
    obstacles: &[Segment],
    params: &SfmParams,
    rng: &mut SimRng,
) -> Vec2 {
    let p = ped.position();
    let to_goal = (ped.goal - p).normalized().unwrap_or(Vec2::ZERO);
    let mut force = (to_goal * ped.desired_speed - ped.body.velocity) / ped.relaxation_time;

    for other in neighbors {
        let delta = p - other.position();
        let d = delta.norm();
        let away = delta.normalized().unwrap_or_else(|| unit_vector(rng));
        force += repulsion(
            params.social_strength,
            params.social_range,
            ped.body.radius + other.radius,
            d,
            away,
        );
    }
    for seg in obstacles {
        let delta = p - seg.closest_point(p);
        let d = delta.norm();
        let away = delta.normalized().unwrap_or_else(|| unit_vector(rng));
        force += repulsion(
            params.obstacle_strength,
            params.obstacle_range,
            ped.body.radius,
            d,
            away,
        );
    }
    force + gaussian_vec(rng, params.noise_std)
}

/// Chains `goals_per_refill` uniformly sampled reachable goals with A*
/// paths, returning the turning points of the route (start excluded).
pub fn sample_waypoints(
    grid: &GridMap,
    start: Vec2,
    goals: usize,
    rng: &mut SimRng,
) -> Result<Vec<Vec2>> {
    let start_cell = grid
        .cell_of(start)
        .filter(|&c| grid.is_free(c))
        .ok_or_else(|| Error::InvalidArgument(format!("start {start:?} is not in free space")))?;
    let mask = grid.component_mask(start_cell);
    let reachable: Vec<_> = grid
        .free_cells()
        .filter(|&c| c != start_cell && mask[grid.component_index(c)])
        .collect();
    if reachable.is_empty() {
        return Err(Error::Config("no reachable free cells to sample".into()));
    }
    let mut route = Vec::new();
    let mut from = start_cell;
    for _ in 0..goals.max(1) {
        let goal = reachable[rng.random_range(0..reachable.len())];
        if goal == from {
            continue;
        }
        let path = astar(grid, from, goal)?;
        route.extend(simplify(&path.waypoints[1..]));
        from = goal;
    }
    if route.is_empty() {
        route.push(grid.cell_center(from));
    }
    Ok(route)
}

/// Drops interior points that continue in the same direction.
fn simplify(points: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if i + 1 < points.len() && !out.is_empty() {
            let prev = *out.last().unwrap();
            let next = points[i + 1];
            if (p - prev).cross(next - p).abs() < 1e-9 && (p - prev).dot(next - p) > 0.0 {
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// Steps every pedestrian once.
///
/// Forces are evaluated from the pre-step snapshot (Jacobi update), then
/// velocities are integrated and clamped, positions advanced, contacts
/// resolved against each other, `world`'s bodies (held fixed) and its
/// segments. Reached waypoints are popped and exhausted routes refilled.
pub fn step_crowd(
    peds: &mut [Pedestrian],
    world: &WorldState,
    grid: &GridMap,
    params: &SfmParams,
    dt: f64,
    rng: &mut SimRng,
) {
    let snapshot: Vec<Body> = peds.iter().map(|p| p.body.clone()).collect();
    let forces: Vec<Vec2> = peds
        .iter()
        .enumerate()
        .map(|(i, ped)| {
            let neighbors = snapshot
                .iter()
                .enumerate()
                .filter(move |&(j, _)| j != i)
                .map(|(_, b)| b)
                .chain(world.bodies.iter().filter(|b| b.solid));
            sfm_force(ped, neighbors, &world.obstacles, params, rng)
        })
        .collect();

    for (ped, f) in peds.iter_mut().zip(forces) {
        let body = &mut ped.body;
        body.velocity = (body.velocity + f * dt).clamp_norm(body.max_speed);
        body.pose.position += body.velocity * dt;
        if body.velocity.norm() > 1e-9 {
            body.pose.heading = body.velocity.angle();
        }
    }

    separate(peds, world);

    for ped in peds.iter_mut() {
        refresh_route(ped, grid, params, rng);
    }
}

/// Contact projection for pedestrians with the world's bodies held fixed.
fn separate(peds: &mut [Pedestrian], world: &WorldState) {
    let mut scratch = WorldState::with_rng(world.dt(), world.rng.clone());
    scratch.obstacles = world.obstacles.clone();
    for p in peds.iter() {
        scratch.add_body(p.body.clone());
    }
    for b in world.bodies.iter().filter(|b| b.solid) {
        scratch.add_body(b.clone().fixed());
    }
    scratch.resolve_collisions();
    for (ped, b) in peds.iter_mut().zip(&scratch.bodies) {
        ped.body.pose.position = b.pose.position;
    }
}

fn refresh_route(ped: &mut Pedestrian, grid: &GridMap, params: &SfmParams, rng: &mut SimRng) {
    while ped.position().distance(ped.goal) <= params.waypoint_radius {
        if let Some(next) = ped.waypoints.pop_front() {
            ped.goal = next;
            continue;
        }
        let here = ped.position();
        let start = match grid.cell_of(here).filter(|&c| grid.is_free(c)) {
            Some(_) => Some(here),
            None => grid.nearest_free(here).map(|c| grid.cell_center(c)),
        };
        if let Some(route) = start.and_then(|s| sample_waypoints(grid, s, params.goals_per_refill, rng).ok()) {
            ped.set_route(route);
        }
        break;
    }
}

/// Places `n` pedestrians on free cells of `grid`, non-overlapping with each
/// other and with `world`'s solid bodies, each with a fresh route.
pub fn spawn_crowd(
    n: usize,
    grid: &GridMap,
    world: &WorldState,
    params: &SfmParams,
    keep_clear: &[(Vec2, f64)],
    rng: &mut SimRng,
) -> Result<Vec<Pedestrian>> {
    let free: Vec<_> = grid.free_cells().collect();
    if free.is_empty() {
        return Err(Error::Config("crowd area has no free cells".into()));
    }
    let mut peds: Vec<Pedestrian> = Vec::with_capacity(n);
    let mut attempts = 0;
    while peds.len() < n {
        attempts += 1;
        if attempts > 200 * n.max(1) + 1000 {
            return Err(Error::Config(format!(
                "could not place {n} pedestrians without overlap"
            )));
        }
        let cell = free[rng.random_range(0..free.len())];
        let p = grid.cell_center(cell);
        let gap = 0.05;
        let clash = peds
            .iter()
            .any(|q| q.position().distance(p) < 2.0 * params.radius + gap)
            || world
                .bodies
                .iter()
                .filter(|b| b.solid)
                .any(|b| b.position().distance(p) < b.radius + params.radius + gap)
            || keep_clear.iter().any(|&(c, r)| c.distance(p) < r);
        if clash {
            continue;
        }
        let mut ped = Pedestrian::new(p, params);
        ped.set_route(sample_waypoints(grid, p, params.goals_per_refill, rng)?);
        peds.push(ped);
    }
    Ok(peds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::grid::clearance_grid;
    use crate::rng::seeded_rng;

    fn quiet() -> SfmParams {
        SfmParams {
            noise_std: 0.0,
            ..SfmParams::default()
        }
    }

    #[test]
    fn lone_pedestrian_goal_force() {
        let params = quiet();
        let mut ped = Pedestrian::new(Vec2::ZERO, &params);
        ped.goal = Vec2::new(10.0, 0.0);
        let f = sfm_force(&ped, [], &[], &params, &mut seeded_rng(0));
        assert!((f.x - 2.68).abs() < 1e-12 && f.y.abs() < 1e-12);
    }

    #[test]
    fn at_goal_and_at_rest_is_force_free() {
        let params = quiet();
        let ped = Pedestrian::new(Vec2::new(3.0, 4.0), &params);
        let f = sfm_force(&ped, [], &[], &params, &mut seeded_rng(0));
        assert_eq!(f, Vec2::ZERO);
    }

    #[test]
    fn touching_pair_repels_with_strength_a() {
        let params = quiet();
        let a = Pedestrian::new(Vec2::ZERO, &params);
        let b = Pedestrian::new(Vec2::new(0.6, 0.0), &params);
        let fa = sfm_force(&a, [&b.body], &[], &params, &mut seeded_rng(0));
        let fb = sfm_force(&b, [&a.body], &[], &params, &mut seeded_rng(0));
        assert!((fa.norm() - 5.0).abs() < 1e-12);
        assert!((fa + fb).norm() < 1e-12);
        assert!(fa.x < 0.0);
    }

    #[test]
    fn coincident_pair_gets_random_unit_direction() {
        let params = quiet();
        let a = Pedestrian::new(Vec2::ZERO, &params);
        let f = sfm_force(&a, [&a.body.clone()], &[], &params, &mut seeded_rng(3));
        // exp(0.6 / 0.3) · A along a random unit vector.
        assert!((f.norm() - 5.0 * 2.0f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn repulsion_decreases_with_distance() {
        let params = quiet();
        let a = Pedestrian::new(Vec2::ZERO, &params);
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let b = Pedestrian::new(Vec2::new(0.1 + 0.1 * k as f64, 0.0), &params);
            let f = sfm_force(&a, [&b.body], &[], &params, &mut seeded_rng(0)).norm();
            assert!(f < last);
            last = f;
        }
    }

    fn split_arena() -> (WorldState, GridMap) {
        let mut w = WorldState::new(0.1, 0);
        let area = Rect::new(Vec2::ZERO, Vec2::new(10.0, 10.0));
        w.obstacles.extend(area.edges());
        w.obstacles.push(Segment::new(Vec2::new(5.0, 0.0), Vec2::new(5.0, 10.0)));
        let g = clearance_grid(&w, 0.25, area, 0.3);
        (w, g)
    }

    #[test]
    fn waypoints_stay_in_start_component() {
        let (_, g) = split_arena();
        let start = Vec2::new(2.0, 5.0);
        let mask = g.component_mask(g.cell_of(start).unwrap());
        let mut rng = seeded_rng(9);
        for _ in 0..50 {
            for w in sample_waypoints(&g, start, 3, &mut rng).unwrap() {
                let c = g.cell_of(w).unwrap();
                assert!(g.is_free(c) && mask[g.component_index(c)]);
                assert!(w.x < 5.0);
            }
        }
    }

    #[test]
    fn waypoints_are_deterministic() {
        let (_, g) = split_arena();
        let a = sample_waypoints(&g, Vec2::new(7.0, 7.0), 2, &mut seeded_rng(4)).unwrap();
        let b = sample_waypoints(&g, Vec2::new(7.0, 7.0), 2, &mut seeded_rng(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn occupied_start_is_rejected() {
        let (_, g) = split_arena();
        assert!(sample_waypoints(&g, Vec2::new(5.0, 5.0), 1, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn lone_pedestrian_reaches_desired_speed_within_five_tau() {
        let params = quiet();
        let world = WorldState::new(0.1, 0);
        let grid = GridMap::covering(Rect::new(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)), 1.0);
        let mut peds = vec![Pedestrian::new(Vec2::ZERO, &params)];
        peds[0].goal = Vec2::new(40.0, 0.0);
        let steps = (5.0 * params.relaxation_time / 0.1_f64).round() as usize;
        let mut rng = seeded_rng(0);
        for _ in 0..steps {
            step_crowd(&mut peds, &world, &grid, &params, 0.1, &mut rng);
        }
        let v = peds[0].body.velocity;
        assert!((v.norm() - 1.34).abs() / 1.34 < 0.05, "speed {}", v.norm());
        assert!(v.y.abs() < 1e-12);
    }

    #[test]
    fn head_on_pair_in_corridor_passes() {
        let params = SfmParams::default();
        let mut world = WorldState::new(0.1, 0);
        world.obstacles.push(Segment::new(Vec2::new(-2.0, -1.5), Vec2::new(14.0, -1.5)));
        world.obstacles.push(Segment::new(Vec2::new(-2.0, 1.5), Vec2::new(14.0, 1.5)));
        let grid = GridMap::covering(Rect::new(Vec2::new(-2.0, -1.5), Vec2::new(14.0, 1.5)), 0.25);
        let mut peds = vec![
            Pedestrian::new(Vec2::new(0.0, 0.0), &params),
            Pedestrian::new(Vec2::new(12.0, 0.0), &params),
        ];
        peds[0].goal = Vec2::new(12.0, 0.0);
        peds[1].goal = Vec2::new(0.0, 0.0);
        let mut max_lateral: f64 = 0.0;
        let mut rng = seeded_rng(21);
        for _ in 0..200 {
            // Keep them heading for the far ends rather than refilling routes.
            peds[0].goal = Vec2::new(13.0, 0.0);
            peds[1].goal = Vec2::new(-1.0, 0.0);
            step_crowd(&mut peds, &world, &grid, &params, 0.1, &mut rng);
            max_lateral = max_lateral.max(peds[0].position().y.abs()).max(peds[1].position().y.abs());
            assert!(peds[0].position().distance(peds[1].position()) >= 0.6 - 1e-6);
        }
        assert!(max_lateral > 0.1, "no lateral avoidance: {max_lateral}");
        assert!(peds[0].position().x > 6.0, "ped 0 stuck at {:?}", peds[0].position());
        assert!(peds[1].position().x < 6.0, "ped 1 stuck at {:?}", peds[1].position());
    }
}
