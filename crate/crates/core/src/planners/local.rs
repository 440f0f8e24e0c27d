//! Shared pieces of the local controllers: lidar-derived obstacle points,
//! unicycle rollouts and path lookahead.

use crate::geom::{normalize_angle, Pose, Vec2};
use crate::grid::GridMap;
use crate::sim::SensorFrame;

use super::Path;

/// Obstacle points implied by a lidar sweep, in world coordinates, with a
/// lookup grid for fast "within `inflation`" queries.
#[derive(Debug, Clone)]
pub struct LidarCostmap {
    pub points: Vec<Vec2>,
    pub inflation: f64,
    grid: GridMap,
    /// Approximate nearest-point distance per cell, capped at `field_cap`.
    field: Vec<f64>,
    field_cap: f64,
}

impl LidarCostmap {
    /// Points are the hit endpoints of `lidar` taken from `pose`. Cells whose
    /// rectangle comes within `inflation` of a point are marked, so a clear
    /// cell guarantees clearance; marked cells are checked exactly.
    pub fn new(pose: &Pose, lidar: &SensorFrame, inflation: f64) -> Self {
        let points: Vec<Vec2> = lidar.hit_points().map(|d| pose.position + d).collect();
        Self::from_points(points, pose.position, lidar.range, inflation)
    }

    /// Hit points extrapolated `t` seconds ahead along their rays, using each
    /// reading's closing speed plus the sensor's own velocity `own` (world
    /// frame). Static segments are not moved.
    pub fn predicted(pose: &Pose, lidar: &SensorFrame, own: Vec2, inflation: f64, t: f64) -> Self {
        let points: Vec<Vec2> = lidar
            .readings
            .iter()
            .enumerate()
            .filter(|(_, r)| r.hit.is_some())
            .map(|(k, r)| {
                let dir = Vec2::from_angle(lidar.ray_angle(k));
                let radial = if r.body.is_some() { r.relative_speed + own.dot(dir) } else { 0.0 };
                pose.position + dir * (r.distance + radial * t)
            })
            .collect();
        Self::from_points(points, pose.position, lidar.range, inflation)
    }

    fn from_points(points: Vec<Vec2>, center: Vec2, range: f64, inflation: f64) -> Self {
        let extent = range + inflation + 1.0;
        let cell = 0.25;
        let n = (2.0 * extent / cell).ceil() as usize;
        let origin = center - Vec2::new(extent, extent);
        let mut grid = GridMap::new(origin, cell, n, n);
        let reach = ((inflation + cell) / cell).ceil() as i64;
        for p in &points {
            if let Some((c, r)) = grid.cell_of(*p) {
                for dr in -reach..=reach {
                    for dc in -reach..=reach {
                        let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                        if grid.in_bounds(nc, nr) {
                            grid.set((nc as usize, nr as usize), true);
                        }
                    }
                }
            }
        }
        Self {
            points,
            inflation,
            grid,
            field: Vec::new(),
            field_cap: 0.0,
        }
    }

    /// Precomputes cell-center distances up to `cap` for [`Self::approx_distance`].
    pub fn with_distance_field(mut self, cap: f64) -> Self {
        let g = &self.grid;
        let mut field = vec![cap; g.width * g.height];
        let reach = (cap / g.cell_size).ceil() as i64 + 1;
        for p in &self.points {
            let Some((c, r)) = g.cell_of(*p) else { continue };
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if g.in_bounds(nc, nr) {
                        let i = nr as usize * g.width + nc as usize;
                        let d = g.cell_center((nc as usize, nr as usize)).distance(*p);
                        if d < field[i] {
                            field[i] = d;
                        }
                    }
                }
            }
        }
        self.field = field;
        self.field_cap = cap;
        self
    }

    /// Distance to the nearest obstacle point, quantized to the cell centers
    /// and capped; equals the cap when no field was built.
    pub fn approx_distance(&self, p: Vec2) -> f64 {
        match self.grid.cell_of(p) {
            Some((c, r)) if !self.field.is_empty() => self.field[r * self.grid.width + c],
            _ => self.field_cap,
        }
    }

    /// Distance from `p` to the nearest obstacle point.
    pub fn distance(&self, p: Vec2) -> f64 {
        self.points
            .iter()
            .map(|q| q.distance_sq(p))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// True when `p` lies strictly within `inflation` of an obstacle point.
    pub fn collides(&self, p: Vec2) -> bool {
        match self.grid.cell_of(p) {
            Some(c) if !self.grid.is_occupied(c) => false,
            _ => self.points.iter().any(|q| q.distance_sq(p) < self.inflation * self.inflation),
        }
    }
}

/// Exact unicycle motion for one step of constant `(v, ω)`.
pub fn unicycle_step(pose: Pose, v: f64, omega: f64, dt: f64) -> Pose {
    // Same heading-first update as the simulator kernel.
    let heading = normalize_angle(pose.heading + omega * dt);
    Pose::new(pose.position + Vec2::from_angle(heading) * (v * dt), heading)
}

/// Lookahead target: the path point `lookahead` meters past the projection of `p`.
pub fn carrot(path: &Path, p: Vec2, lookahead: f64) -> Vec2 {
    path.point_at(path.project(p) + lookahead)
}

/// Signed angle from the robot's heading to `target`.
pub fn bearing(pose: &Pose, target: Vec2) -> f64 {
    let local = pose.to_local(target);
    local.y.atan2(local.x)
}
