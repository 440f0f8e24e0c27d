use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::{Cell, GridMap};

/// A planned route through free cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    /// Cell centers of `cells`, in world coordinates.
    pub waypoints: Vec<Vec2>,
    /// Sum of segment lengths between consecutive waypoints, meters.
    pub total_length: f64,
}

impl Path {
    /// Path cost in cell units (straight move 1, diagonal √2).
    pub fn cost_cells(&self, cell_size: f64) -> f64 {
        self.total_length / cell_size
    }

    /// Point `distance` meters along the path from its start (clamped to the ends).
    pub fn point_at(&self, mut distance: f64) -> Vec2 {
        for w in self.waypoints.windows(2) {
            let len = w[0].distance(w[1]);
            if distance <= len {
                return if len > 0.0 { w[0].lerp(w[1], distance / len) } else { w[0] };
            }
            distance -= len;
        }
        *self.waypoints.last().expect("path has at least one waypoint")
    }

    /// Arc-length position of the waypoint-polyline point closest to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let seg = crate::geom::Segment::new(w[0], w[1]);
            let q = seg.closest_point(p);
            let d = q.distance(p);
            if d < best.0 {
                best = (d, acc + w[0].distance(q));
            }
            acc += w[0].distance(w[1]);
        }
        if self.waypoints.len() == 1 {
            return 0.0;
        }
        best.1
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    seq: u64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then on insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Octile distance: exact cost between two cells on an empty 8-connected grid.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    hi - lo + lo * std::f64::consts::SQRT_2
}

/// Minimal-cost 8-connected path between two free cells.
///
/// Moves follow [`GridMap::neighbors`]; the octile heuristic is admissible
/// and consistent, so the first expansion of the goal is optimal. Equal
/// priorities are popped in insertion order.
pub fn astar(grid: &GridMap, start: Cell, goal: Cell) -> Result<Path> {
    for c in [start, goal] {
        if !grid.is_free(c) {
            return Err(Error::OccupiedCell(c));
        }
    }
    let n = grid.width * grid.height;
    let idx = |c: Cell| c.1 * grid.width + c.0;
    let cell = |i: usize| (i % grid.width, i / grid.width);

    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;

    g[idx(start)] = 0.0;
    heap.push(Open {
        f: octile(start, goal),
        seq,
        idx: idx(start),
    });

    while let Some(Open { idx: cur, .. }) = heap.pop() {
        if closed[cur] {
            continue;
        }
        closed[cur] = true;
        if cur == idx(goal) {
            let mut cells = vec![goal];
            let mut at = cur;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(cell(at));
            }
            cells.reverse();
            return Ok(build_path(grid, cells));
        }
        for (next, step) in grid.neighbors(cell(cur)) {
            let ni = idx(next);
            if closed[ni] {
                continue;
            }
            let cand = g[cur] + step;
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = cur;
                seq += 1;
                heap.push(Open {
                    f: cand + octile(next, goal),
                    seq,
                    idx: ni,
                });
            }
        }
    }
    Err(Error::NoPath { start, goal })
}

fn build_path(grid: &GridMap, cells: Vec<Cell>) -> Path {
    let waypoints: Vec<Vec2> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    let total_length = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
    Path {
        cells,
        waypoints,
        total_length,
    }
}

/// World-coordinate convenience wrapper around [`astar`].
pub fn astar_world(grid: &GridMap, start: Vec2, goal: Vec2) -> Result<Path> {
    let s = grid
        .cell_of(start)
        .ok_or_else(|| Error::InvalidArgument(format!("start {start:?} is off the grid")))?;
    let g = grid
        .cell_of(goal)
        .ok_or_else(|| Error::InvalidArgument(format!("goal {goal:?} is off the grid")))?;
    astar(grid, s, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty(n: usize) -> GridMap {
        GridMap::new(Vec2::ZERO, 1.0, n, n)
    }

    #[test]
    fn straight_line_on_empty_grid() {
        let p = astar(&empty(10), (0, 0), (0, 9)).unwrap();
        assert_eq!(p.cells.len(), 10);
        assert!((p.cost_cells(1.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_costs_octile() {
        let p = astar(&empty(10), (0, 0), (9, 9)).unwrap();
        assert!((p.cost_cells(1.0) - 9.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let g = GridMap::from_ascii(&["..#..", "..#..", "..#.."], 1.0);
        assert!(matches!(astar(&g, (0, 0), (4, 0)), Err(Error::NoPath { .. })));
        assert!(matches!(astar(&g, (2, 0), (4, 0)), Err(Error::OccupiedCell(_))));
    }

    #[test]
    fn path_cells_are_free_and_adjacent() {
        let g = GridMap::from_ascii(
            &["......", ".####.", "....#.", "###.#.", "......"],
            1.0,
        );
        let p = astar(&g, (0, 4), (0, 0)).unwrap();
        for w in p.cells.windows(2) {
            assert!(g.is_free(w[1]));
            assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1);
        }
    }

    #[test]
    fn point_at_walks_the_polyline() {
        let p = astar(&empty(5), (0, 0), (4, 0)).unwrap();
        assert_eq!(p.point_at(1.5), Vec2::new(2.0, 0.5));
        assert_eq!(p.point_at(100.0), Vec2::new(4.5, 0.5));
        assert!((p.project(Vec2::new(3.0, 2.0)) - 2.5).abs() < 1e-12);
    }
}
