use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::LevelError;
use crate::dynamics::DEFAULT_COLLISION_RADIUS;
use crate::geometry::Vec2;
use crate::rng::SplitMix64;
use crate::world::{fmt_sig9, SpawnPoint, WorldMap};

/// Placement attempts allowed per requested room.
const ATTEMPTS_PER_ROOM: usize = 200;

/// Generator parameters. Rooms and corridors live on a coarse grid whose cell
/// side is `corridor_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub seed: u64,
    pub room_count: usize,
    pub room_size_range: (f64, f64),
    pub corridor_width: f64,
    pub grid_extent: f64,
}

impl Default for LevelSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            room_count: 6,
            room_size_range: (4.0, 10.0),
            corridor_width: 2.0,
            grid_extent: 48.0,
        }
    }
}

impl LevelSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LevelError> {
        let (lo, hi) = self.room_size_range;
        let bad = |m: String| Err(LevelError::InvalidSpec(m));
        if self.room_count == 0 {
            return bad("room_count must be at least 1".into());
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad(format!("room_size_range ({lo}, {hi}) must satisfy 0 < min <= max"));
        }
        let min_corridor = 2.0 * DEFAULT_COLLISION_RADIUS + 0.1;
        if !(self.corridor_width.is_finite() && self.corridor_width >= min_corridor) {
            return bad(format!("corridor_width {} must be at least {min_corridor}", self.corridor_width));
        }
        if !(self.grid_extent.is_finite() && self.grid_extent >= self.corridor_width) {
            return bad(format!("grid_extent {} must be at least corridor_width", self.grid_extent));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Room {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Room {
    /// Overlap test with a one-cell gap kept between rooms.
    fn conflicts(&self, o: &Room) -> bool {
        self.x < o.x + o.w + 1 && o.x < self.x + self.w + 1 && self.y < o.y + o.h + 1 && o.y < self.y + self.h + 1
    }

    fn center_cell(&self) -> (usize, usize) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

/// Rounds through the file format so generated maps survive save/load exactly.
fn q(v: f64) -> f64 {
    fmt_sig9(v).parse().expect("formatted float parses")
}

/// Rooms-and-corridors generator. Deterministic in `spec`.
pub fn generate_map(spec: &LevelSpec) -> Result<WorldMap, LevelError> {
    spec.validate()?;
    let c = spec.corridor_width;
    let n = (spec.grid_extent / c).floor() as usize;
    let (lo, hi) = spec.room_size_range;
    let min_cells = ((lo / c).ceil() as usize).max(1);
    let max_cells = ((hi / c).floor() as usize).max(min_cells);
    if min_cells > n {
        return Err(LevelError::Infeasible);
    }
    let max_cells = max_cells.min(n);

    let mut rng = SplitMix64::new(spec.seed);
    let mut rooms: Vec<Room> = Vec::with_capacity(spec.room_count);
    let mut attempts = 0;
    while rooms.len() < spec.room_count {
        if attempts == ATTEMPTS_PER_ROOM * spec.room_count {
            return Err(LevelError::Infeasible);
        }
        attempts += 1;
        let w = rng.range_u32(min_cells as u32, max_cells as u32 + 1) as usize;
        let h = rng.range_u32(min_cells as u32, max_cells as u32 + 1) as usize;
        let x = rng.range_u32(0, (n - w + 1) as u32) as usize;
        let y = rng.range_u32(0, (n - h + 1) as u32) as usize;
        let room = Room { x, y, w, h };
        if rooms.iter().all(|r| !room.conflicts(r)) {
            rooms.push(room);
        }
    }

    let mut floor = vec![false; n * n];
    for r in &rooms {
        for iy in r.y..r.y + r.h {
            for ix in r.x..r.x + r.w {
                floor[iy * n + ix] = true;
            }
        }
    }
    for pair in rooms.windows(2) {
        let (ax, ay) = pair[1].center_cell();
        let (bx, by) = pair[0].center_cell();
        let horizontal_first = rng.next_bool();
        let (cx, cy) = if horizontal_first { (bx, ay) } else { (ax, by) };
        for (x0, y0, x1, y1) in [(ax, ay, cx, cy), (cx, cy, bx, by)] {
            for iy in y0.min(y1)..=y0.max(y1) {
                for ix in x0.min(x1)..=x0.max(x1) {
                    floor[iy * n + ix] = true;
                }
            }
        }
    }

    let (vertices, edges) = trace_walls(&floor, n, c);

    let spawns = rooms
        .iter()
        .map(|r| {
            let theta = q(rng.range_f64(-PI, PI));
            SpawnPoint::new(
                q((r.x as f64 + r.w as f64 / 2.0) * c),
                q((r.y as f64 + r.h as f64 / 2.0) * c),
                theta,
            )
        })
        .collect();
    Ok(WorldMap::new(format!("gen-{}", spec.seed), vertices, edges, spawns))
}

/// Emits unit wall pieces on every floor/non-floor cell boundary and merges
/// collinear runs through vertices that no perpendicular wall touches.
fn trace_walls(floor: &[bool], n: usize, cell: f64) -> (Vec<Vec2>, Vec<(usize, usize)>) {
    let is_floor = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < n && (y as usize) < n && floor[y as usize * n + x as usize];

    // Horizontal piece (x, y): from grid point (x, y) to (x + 1, y).
    let mut horizontal = BTreeSet::new();
    // Vertical piece (x, y): from grid point (x, y) to (x, y + 1).
    let mut vertical = BTreeSet::new();
    for y in 0..=n as i64 {
        for x in 0..n as i64 {
            if is_floor(x, y - 1) != is_floor(x, y) {
                horizontal.insert((y, x));
            }
        }
    }
    for x in 0..=n as i64 {
        for y in 0..n as i64 {
            if is_floor(x - 1, y) != is_floor(x, y) {
                vertical.insert((x, y));
            }
        }
    }
    let touches_vertical = |x: i64, y: i64| vertical.contains(&(x, y)) || vertical.contains(&(x, y - 1));
    let touches_horizontal = |x: i64, y: i64| horizontal.contains(&(y, x)) || horizontal.contains(&(y, x - 1));

    let mut vertex_ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut vid = |p: (i64, i64), vertices: &mut Vec<Vec2>| {
        *vertex_ids.entry(p).or_insert_with(|| {
            vertices.push(Vec2::new(q(p.0 as f64 * cell), q(p.1 as f64 * cell)));
            vertices.len() - 1
        })
    };
    let mut edges = Vec::new();

    // Pieces are visited in sorted order, so runs extend left to right.
    let mut used = BTreeSet::new();
    for &(y, x) in &horizontal {
        if used.contains(&(y, x)) {
            continue;
        }
        let mut end = x + 1;
        while horizontal.contains(&(y, end)) && !touches_vertical(end, y) {
            used.insert((y, end));
            end += 1;
        }
        let a = vid((x, y), &mut vertices);
        let b = vid((end, y), &mut vertices);
        edges.push((a, b));
    }
    let mut used = BTreeSet::new();
    for &(x, y) in &vertical {
        if used.contains(&(x, y)) {
            continue;
        }
        let mut end = y + 1;
        while vertical.contains(&(x, end)) && !touches_horizontal(x, end) {
            used.insert((x, end));
            end += 1;
        }
        let a = vid((x, y), &mut vertices);
        let b = vid((x, end), &mut vertices);
        edges.push((a, b));
    }
    (vertices, edges)
}
