//! Abstract multi-room floor plans: rectangular rooms, doorway gaps and
//! rectangular furniture.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Rect, Segment, Vec2};
use crate::grid::GridMap;
use crate::rng::SimRng;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorParams {
    pub min_rooms: usize,
    pub max_rooms: usize,
    /// Building footprint ranges, meters.
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub min_room_side: f64,
    pub door_width: f64,
    pub max_furniture_per_room: usize,
    pub furniture_side: (f64, f64),
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            min_rooms: 3,
            max_rooms: 5,
            width: (10.0, 16.0),
            height: (8.0, 12.0),
            min_room_side: 2.5,
            door_width: 1.0,
            max_furniture_per_room: 2,
            furniture_side: (0.4, 1.2),
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("room_layout: {m}")));
        if self.min_rooms == 0 || self.min_rooms > self.max_rooms {
            return bad("need 1 ≤ min_rooms ≤ max_rooms");
        }
        for (name, (lo, hi)) in [
            ("width", self.width),
            ("height", self.height),
            ("furniture_side", self.furniture_side),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(&format!("{name} range must satisfy 0 < lo ≤ hi"));
            }
        }
        if !(self.door_width > 0.0) || !(self.min_room_side > self.door_width) {
            return bad("min_room_side must exceed door_width > 0");
        }
        if self.width.0 < self.min_room_side || self.height.0 < self.min_room_side {
            return bad("building smaller than one room");
        }
        Ok(())
    }
}

/// How the exploration map is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoomLayout {
    /// Randomized rooms per episode.
    Generated(GeneratorParams),
    /// A fixed plan, e.g. a hand-made test map.
    Explicit {
        bounds: Rect,
        walls: Vec<Segment>,
        #[serde(default)]
        furniture: Vec<Rect>,
    },
}

impl Default for RoomLayout {
    fn default() -> Self {
        RoomLayout::Generated(GeneratorParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub bounds: Rect,
    pub rooms: Vec<Rect>,
    pub walls: Vec<Segment>,
    pub doors: Vec<Segment>,
    pub furniture: Vec<Rect>,
}

impl FloorPlan {
    /// Every static segment: walls plus furniture outlines.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = self.walls.clone();
        for f in &self.furniture {
            out.extend(f.edges());
        }
        out
    }

    /// Marks cells whose center lies inside a furniture footprint.
    pub fn fill_furniture(&self, grid: &mut GridMap) {
        for r in 0..grid.height {
            for c in 0..grid.width {
                let p = grid.cell_center((c, r));
                if self.furniture.iter().any(|f| f.contains(p)) {
                    grid.set((c, r), true);
                }
            }
        }
    }
}

impl RoomLayout {
    pub fn validate(&self) -> Result<()> {
        match self {
            RoomLayout::Generated(p) => p.validate(),
            RoomLayout::Explicit { bounds, .. } => {
                if bounds.is_empty() {
                    Err(Error::Config("room_layout: empty bounds".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn build(&self, rng: &mut SimRng) -> Result<FloorPlan> {
        match self {
            RoomLayout::Generated(p) => generate(p, rng),
            RoomLayout::Explicit {
                bounds,
                walls,
                furniture,
            } => Ok(FloorPlan {
                bounds: *bounds,
                rooms: vec![*bounds],
                walls: walls.clone(),
                doors: Vec::new(),
                furniture: furniture.clone(),
            }),
        }
    }
}

/// Axis-aligned wall line: `vertical` walls sit at `x = at`, spanning `y ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Span {
    vertical: bool,
    at: f64,
    lo: f64,
    hi: f64,
}

fn spans_of(r: &Rect) -> [Span; 4] {
    [
        Span { vertical: false, at: r.min.y, lo: r.min.x, hi: r.max.x },
        Span { vertical: false, at: r.max.y, lo: r.min.x, hi: r.max.x },
        Span { vertical: true, at: r.min.x, lo: r.min.y, hi: r.max.y },
        Span { vertical: true, at: r.max.x, lo: r.min.y, hi: r.max.y },
    ]
}

fn to_segment(s: &Span) -> Segment {
    if s.vertical {
        Segment::new(Vec2::new(s.at, s.lo), Vec2::new(s.at, s.hi))
    } else {
        Segment::new(Vec2::new(s.lo, s.at), Vec2::new(s.hi, s.at))
    }
}

/// Shared wall between two rooms as `(vertical, at, lo, hi)`, if any.
fn shared_wall(a: &Rect, b: &Rect) -> Option<Span> {
    for sa in spans_of(a) {
        for sb in spans_of(b) {
            if sa.vertical == sb.vertical && (sa.at - sb.at).abs() < EPS {
                let lo = sa.lo.max(sb.lo);
                let hi = sa.hi.min(sb.hi);
                if hi - lo > EPS {
                    return Some(Span { vertical: sa.vertical, at: sa.at, lo, hi });
                }
            }
        }
    }
    None
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

fn generate(p: &GeneratorParams, rng: &mut SimRng) -> Result<FloorPlan> {
    p.validate()?;
    let w = rng.random_range(p.width.0..=p.width.1);
    let h = rng.random_range(p.height.0..=p.height.1);
    let bounds = Rect::new(Vec2::ZERO, Vec2::new(w, h));
    let target = rng.random_range(p.min_rooms..=p.max_rooms);

    // Guillotine partition: split the largest splittable room along its long side.
    let mut rooms = vec![bounds];
    while rooms.len() < target {
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by(|&a, &b| {
            let area = |r: &Rect| r.width() * r.height();
            area(&rooms[b]).total_cmp(&area(&rooms[a])).then(a.cmp(&b))
        });
        let Some(k) = order
            .into_iter()
            .find(|&k| rooms[k].width().max(rooms[k].height()) >= 2.0 * p.min_room_side)
        else {
            break;
        };
        let r = rooms[k];
        let vertical_cut = r.width() >= r.height();
        let len = if vertical_cut { r.width() } else { r.height() };
        let lo = (0.35 * len).max(p.min_room_side);
        let hi = (0.65 * len).min(len - p.min_room_side);
        let cut = if hi > lo { rng.random_range(lo..=hi) } else { 0.5 * len };
        let (a, b) = if vertical_cut {
            let x = r.min.x + cut;
            (Rect::new(r.min, Vec2::new(x, r.max.y)), Rect::new(Vec2::new(x, r.min.y), r.max))
        } else {
            let y = r.min.y + cut;
            (Rect::new(r.min, Vec2::new(r.max.x, y)), Rect::new(Vec2::new(r.min.x, y), r.max))
        };
        rooms[k] = a;
        rooms.push(b);
    }

    // Random spanning tree over rooms that share enough wall for a doorway.
    let margin = 0.3;
    let mut edges: Vec<(usize, usize, Span)> = Vec::new();
    for i in 0..rooms.len() {
        for j in i + 1..rooms.len() {
            if let Some(s) = shared_wall(&rooms[i], &rooms[j]) {
                if s.hi - s.lo >= p.door_width + 2.0 * margin {
                    edges.push((i, j, s));
                }
            }
        }
    }
    edges.shuffle(rng);
    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    let mut doors: Vec<Span> = Vec::new();
    for (i, j, s) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj {
            continue;
        }
        parent[ri] = rj;
        let half = 0.5 * p.door_width;
        let c = rng.random_range(s.lo + margin + half..=s.hi - margin - half);
        doors.push(Span { lo: c - half, hi: c + half, ..s });
    }

    // Merge collinear room edges into wall lines, then carve the doorways.
    let mut lines: BTreeMap<(bool, i64), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rooms {
        for s in spans_of(r) {
            lines
                .entry((s.vertical, (s.at * 1e6).round() as i64))
                .or_default()
                .push((s.lo, s.hi));
        }
    }
    let mut walls = Vec::new();
    for ((vertical, key), mut ivs) in lines {
        let at = key as f64 / 1e6;
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in ivs {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + EPS => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        for d in doors.iter().filter(|d| d.vertical == vertical && (d.at - at).abs() < 1e-5) {
            merged = merged
                .into_iter()
                .flat_map(|(lo, hi)| {
                    if d.hi <= lo || d.lo >= hi {
                        vec![(lo, hi)]
                    } else {
                        [(lo, d.lo), (d.hi, hi)].into_iter().filter(|(a, b)| b - a > EPS).collect()
                    }
                })
                .collect();
        }
        for (lo, hi) in merged {
            walls.push(to_segment(&Span { vertical, at, lo, hi }));
        }
    }

    // Furniture, kept clear of doorways.
    let door_zones: Vec<Rect> = doors
        .iter()
        .map(|d| {
            let s = to_segment(d);
            let c = (s.a + s.b) * 0.5;
            Rect::from_center(c, 0.5 * p.door_width + 0.8, 0.5 * p.door_width + 0.8)
        })
        .collect();
    let mut furniture = Vec::new();
    for room in &rooms {
        let count = rng.random_range(0..=p.max_furniture_per_room);
        let mut placed = 0;
        for _ in 0..20 {
            if placed == count {
                break;
            }
            let fw = rng.random_range(p.furniture_side.0..=p.furniture_side.1);
            let fh = rng.random_range(p.furniture_side.0..=p.furniture_side.1);
            let inset = 0.15;
            if room.width() < fw + 2.0 * inset || room.height() < fh + 2.0 * inset {
                continue;
            }
            let x = rng.random_range(room.min.x + inset..=room.max.x - inset - fw);
            let y = rng.random_range(room.min.y + inset..=room.max.y - inset - fh);
            let f = Rect::new(Vec2::new(x, y), Vec2::new(x + fw, y + fh));
            if door_zones.iter().chain(&furniture).any(|z| overlaps(z, &f)) {
                continue;
            }
            furniture.push(f);
            placed += 1;
        }
    }

    Ok(FloorPlan {
        bounds,
        rooms,
        walls,
        doors: doors.iter().map(to_segment).collect(),
        furniture,
    })
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.min.x < b.max.x && b.min.x < a.max.x && a.min.y < b.max.y && b.min.y < a.max.y
}
