//! Occupancy grids: rasterization of a world, clearance (inflated) grids,
//! connectivity, and the rotated egocentric patch observation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geom::{Pose, Rect, Vec2};
use crate::sim::WorldState;

/// `(column, row)` index into a [`GridMap`]; row 0 is the lowest `y`.
pub type Cell = (usize, usize);

/// Moves of the 8-connected neighborhood with their step costs.
pub(crate) const NEIGHBORS: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub origin: Vec2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    occupancy: Vec<bool>,
}

impl GridMap {
    pub fn new(origin: Vec2, cell_size: f64, width: usize, height: usize) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        Self {
            origin,
            cell_size,
            width,
            height,
            occupancy: vec![false; width * height],
        }
    }

    /// Free grid covering `bounds`.
    pub fn covering(bounds: Rect, cell_size: f64) -> Self {
        assert!(!bounds.is_empty(), "bounds must be non-empty");
        let width = (bounds.width() / cell_size - 1e-9).ceil().max(1.0) as usize;
        let height = (bounds.height() / cell_size - 1e-9).ceil().max(1.0) as usize;
        Self::new(bounds.min, cell_size, width, height)
    }

    /// Builds a grid from rows given top-to-bottom, `'#'` meaning occupied.
    pub fn from_ascii(rows: &[&str], cell_size: f64) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut g = Self::new(Vec2::ZERO, cell_size, width, height);
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                g.set((c, height - 1 - r), ch == '#');
            }
        }
        g
    }

    fn idx(&self, (c, r): Cell) -> usize {
        r * self.width + c
    }

    pub fn in_bounds(&self, c: i64, r: i64) -> bool {
        c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupancy[self.idx(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height && !self.is_occupied(cell)
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) {
        let i = self.idx(cell);
        self.occupancy[i] = occupied;
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            self.origin,
            self.origin
                + Vec2::new(
                    self.width as f64 * self.cell_size,
                    self.height as f64 * self.cell_size,
                ),
        )
    }

    pub fn cell_rect(&self, (c, r): Cell) -> Rect {
        let min = self.origin + Vec2::new(c as f64, r as f64) * self.cell_size;
        Rect::new(min, min + Vec2::new(self.cell_size, self.cell_size))
    }

    pub fn cell_center(&self, (c, r): Cell) -> Vec2 {
        self.origin + Vec2::new(c as f64 + 0.5, r as f64 + 0.5) * self.cell_size
    }

    /// The unique cell containing `p` (half-open cells), or `None` off-grid.
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.y - self.origin.y) / self.cell_size).floor();
        (c.is_finite() && r.is_finite() && self.in_bounds(c as i64, r as i64))
            .then_some((c as usize, r as usize))
    }

    /// Occupancy at a world point; off-grid points read as occupied.
    pub fn occupied_at(&self, p: Vec2) -> bool {
        self.cell_of(p).is_none_or(|c| self.is_occupied(c))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| (c, r)))
            .filter(|&c| !self.is_occupied(c))
    }

    /// Free 8-neighbors of `cell` with move costs (in cells). Diagonal moves
    /// are only allowed when both orthogonal cells they pass are free, so a
    /// move never clips an occupied corner.
    pub fn neighbors(&self, (c, r): Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dc, dr, cost)| {
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            if !self.in_bounds(nc, nr) {
                return None;
            }
            let next = (nc as usize, nr as usize);
            if self.is_occupied(next) {
                return None;
            }
            if dc != 0 && dr != 0 {
                let side_a = (nc as usize, r);
                let side_b = (c, nr as usize);
                if self.is_occupied(side_a) || self.is_occupied(side_b) {
                    return None;
                }
            }
            Some((next, cost))
        })
    }

    /// Mask of free cells reachable from `start` under the [`neighbors`](Self::neighbors) rule.
    pub fn component_mask(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.occupancy.len()];
        if !self.is_free(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[self.idx(start)] = true;
        while let Some(cell) = queue.pop_front() {
            for (n, _) in self.neighbors(cell) {
                let i = self.idx(n);
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Component labels (`usize::MAX` for occupied) and the size of each component.
    pub fn components(&self) -> (Vec<usize>, Vec<usize>) {
        let mut labels = vec![usize::MAX; self.occupancy.len()];
        let mut sizes = Vec::new();
        for start in self.free_cells().collect::<Vec<_>>() {
            if labels[self.idx(start)] != usize::MAX {
                continue;
            }
            let label = sizes.len();
            let mut size = 0;
            let mut queue = VecDeque::from([start]);
            labels[self.idx(start)] = label;
            while let Some(cell) = queue.pop_front() {
                size += 1;
                for (n, _) in self.neighbors(cell) {
                    let i = self.idx(n);
                    if labels[i] == usize::MAX {
                        labels[i] = label;
                        queue.push_back(n);
                    }
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }

    /// Cells of the largest connected free component, in row-major order.
    /// Ties go to the component discovered first.
    pub fn largest_component(&self) -> Vec<Cell> {
        let (labels, sizes) = self.components();
        let Some(best) = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(l, _)| l)
        else {
            return Vec::new();
        };
        self.free_cells()
            .filter(|&c| labels[self.idx(c)] == best)
            .collect()
    }

    pub fn component_index(&self, cell: Cell) -> usize {
        self.idx(cell)
    }

    /// Free cell nearest to `p` (Euclidean between centers); ties to lowest index.
    pub fn nearest_free(&self, p: Vec2) -> Option<Cell> {
        self.free_cells().min_by(|&a, &b| {
            self.cell_center(a)
                .distance(p)
                .total_cmp(&self.cell_center(b).distance(p))
        })
    }

    /// A copy where every occupied cell's disc of `radius` (measured from cell
    /// centers) is also marked occupied.
    pub fn inflate(&self, radius: f64) -> GridMap {
        let mut out = self.clone();
        let reach = (radius / self.cell_size).ceil() as i64;
        for r in 0..self.height {
            for c in 0..self.width {
                if !self.is_occupied((c, r)) {
                    continue;
                }
                for dr in -reach..=reach {
                    for dc in -reach..=reach {
                        let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                        if self.in_bounds(nc, nr)
                            && ((dc * dc + dr * dr) as f64).sqrt() * self.cell_size <= radius
                        {
                            out.set((nc as usize, nr as usize), true);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Marks every cell whose rectangle touches an obstacle segment or a fixed body.
pub fn rasterize(state: &WorldState, cell_size: f64, bounds: Rect) -> GridMap {
    let mut grid = GridMap::covering(bounds, cell_size);
    for seg in &state.obstacles {
        let lo = Vec2::new(seg.a.x.min(seg.b.x), seg.a.y.min(seg.b.y));
        let hi = Vec2::new(seg.a.x.max(seg.b.x), seg.a.y.max(seg.b.y));
        for cell in cell_range(&grid, lo, hi) {
            if grid.cell_rect(cell).overlaps_segment(seg) {
                grid.set(cell, true);
            }
        }
    }
    for body in state.bodies.iter().filter(|b| b.fixed) {
        let p = body.position();
        let ext = Vec2::new(body.radius, body.radius);
        for cell in cell_range(&grid, p - ext, p + ext) {
            if grid.cell_rect(cell).overlaps_circle(p, body.radius) {
                grid.set(cell, true);
            }
        }
    }
    grid
}

/// Grid of cells whose *centers* keep at least `radius` clearance from every
/// obstacle segment and fixed body; everything else is occupied. A disc of
/// `radius` centred on any free cell center is collision-free.
pub fn clearance_grid(state: &WorldState, cell_size: f64, bounds: Rect, radius: f64) -> GridMap {
    let mut grid = GridMap::covering(bounds, cell_size);
    let pad = Vec2::new(radius, radius);
    for seg in &state.obstacles {
        let lo = Vec2::new(seg.a.x.min(seg.b.x), seg.a.y.min(seg.b.y)) - pad;
        let hi = Vec2::new(seg.a.x.max(seg.b.x), seg.a.y.max(seg.b.y)) + pad;
        for cell in cell_range(&grid, lo, hi) {
            if seg.distance_to(grid.cell_center(cell)) < radius {
                grid.set(cell, true);
            }
        }
    }
    for body in state.bodies.iter().filter(|b| b.fixed) {
        let p = body.position();
        let reach = radius + body.radius;
        let ext = Vec2::new(reach, reach);
        for cell in cell_range(&grid, p - ext, p + ext) {
            if grid.cell_center(cell).distance(p) < reach {
                grid.set(cell, true);
            }
        }
    }
    grid
}

fn cell_range(grid: &GridMap, lo: Vec2, hi: Vec2) -> impl Iterator<Item = Cell> {
    let to_idx = |v: f64, o: f64, max: usize| -> usize {
        (((v - o) / grid.cell_size).floor().max(0.0) as usize).min(max.saturating_sub(1))
    };
    let c0 = to_idx(lo.x, grid.origin.x, grid.width);
    let c1 = to_idx(hi.x, grid.origin.x, grid.width);
    let r0 = to_idx(lo.y, grid.origin.y, grid.height);
    let r1 = to_idx(hi.y, grid.origin.y, grid.height);
    (r0..=r1).flat_map(move |r| (c0..=c1).map(move |c| (c, r)))
}

/// Square, heading-aligned occupancy window centred on an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub size: usize,
    /// Row-major, row 0 is straight ahead of the agent, column 0 is to its left.
    pub cells: Vec<bool>,
}

impl Patch {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.size + col]
    }

    pub fn to_ascii(&self) -> String {
        self.cells
            .chunks(self.size)
            .map(|row| row.iter().map(|&o| if o { '#' } else { '.' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Samples a `patch_cells × patch_cells` window of side `patch_extent`
/// meters around `pose`, rotated so "up" is the agent's heading. Each patch
/// cell reads the grid cell under its center; off-grid reads occupied.
pub fn egocentric_patch(grid: &GridMap, pose: &Pose, patch_cells: usize, patch_extent: f64) -> Patch {
    assert!(patch_cells % 2 == 1, "patch must have a center cell");
    let step = patch_extent / patch_cells as f64;
    let half = (patch_cells / 2) as f64;
    let mut cells = Vec::with_capacity(patch_cells * patch_cells);
    for row in 0..patch_cells {
        for col in 0..patch_cells {
            let forward = (half - row as f64) * step;
            let left = (half - col as f64) * step;
            let p = pose.to_world(Vec2::new(forward, left));
            cells.push(grid.occupied_at(p));
        }
    }
    Patch {
        size: patch_cells,
        cells,
    }
}
