use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::geometry::{segments_intersect, wall_distance, Vec2, HIT_EPSILON};
use crate::world::WorldMap;

/// Side of a connectivity-grid cell in world units.
pub const CONNECTIVITY_CELL: f64 = 0.1;

/// A single broken map invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EdgeIndexOutOfRange { edge: usize, index: usize, vertices: usize },
    DegenerateEdge { edge: usize },
    DuplicateEdge { first: usize, second: usize },
    NonFiniteVertex { vertex: usize },
    NonFiniteSpawn { spawn: usize },
    NoSpawns,
    SpawnTooCloseToWall { spawn: usize, clearance: f64 },
    SpawnUnreachable { spawn: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeIndexOutOfRange { edge, index, vertices } => write!(
                f,
                "edge index out of range: edge {edge} references vertex {index} but the map has {vertices} vertices"
            ),
            Violation::DegenerateEdge { edge } => write!(f, "degenerate edge: edge {edge} has zero length"),
            Violation::DuplicateEdge { first, second } => {
                write!(f, "duplicate edge: edge {second} repeats edge {first}")
            }
            Violation::NonFiniteVertex { vertex } => write!(f, "non-finite vertex {vertex}"),
            Violation::NonFiniteSpawn { spawn } => write!(f, "non-finite spawn {spawn}"),
            Violation::NoSpawns => write!(f, "no spawn points"),
            Violation::SpawnTooCloseToWall { spawn, clearance } => {
                write!(f, "spawn too close to wall: spawn {spawn} has clearance {clearance}")
            }
            Violation::SpawnUnreachable { spawn } => {
                write!(f, "connectivity: spawn {spawn} is not reachable from spawn 0")
            }
        }
    }
}

/// Every violation found in a map; empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks structural invariants, spawn clearance against `radius`, and that
/// every spawn can reach spawn 0 on a [`CONNECTIVITY_CELL`] occupancy grid.
pub fn validate_map(map: &WorldMap, radius: f64) -> ValidationReport {
    let mut violations = Vec::new();
    let nv = map.vertices().len();

    for (i, v) in map.vertices().iter().enumerate() {
        if !v.is_finite() {
            violations.push(Violation::NonFiniteVertex { vertex: i });
        }
    }
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut structural_ok = violations.is_empty();
    for (i, &(u, w)) in map.edges().iter().enumerate() {
        let mut in_range = true;
        for index in [u, w] {
            if index >= nv {
                violations.push(Violation::EdgeIndexOutOfRange {
                    edge: i,
                    index,
                    vertices: nv,
                });
                in_range = false;
            }
        }
        if !in_range {
            structural_ok = false;
            continue;
        }
        if map.vertices()[u].distance(map.vertices()[w]) < HIT_EPSILON {
            violations.push(Violation::DegenerateEdge { edge: i });
            structural_ok = false;
        }
        let key = (u.min(w), u.max(w));
        if let Some(&first) = seen.get(&key) {
            violations.push(Violation::DuplicateEdge { first, second: i });
        } else {
            seen.insert(key, i);
        }
    }

    if map.spawns().is_empty() {
        violations.push(Violation::NoSpawns);
    }
    let mut spawns_ok = true;
    for (i, s) in map.spawns().iter().enumerate() {
        if !(s.x.is_finite() && s.y.is_finite() && s.theta.is_finite()) {
            violations.push(Violation::NonFiniteSpawn { spawn: i });
            spawns_ok = false;
        }
    }
    // Geometric checks need in-range, finite, non-degenerate edges.
    if !structural_ok || !spawns_ok {
        return ValidationReport { violations };
    }

    for (i, s) in map.spawns().iter().enumerate() {
        let clearance = wall_distance(map, s.position(), radius + 1.0);
        if clearance < radius {
            violations.push(Violation::SpawnTooCloseToWall { spawn: i, clearance });
        }
    }
    if map.spawns().len() > 1 {
        let grid = OccupancyGrid::new(map, radius);
        let reach = grid.flood(map.spawns()[0].position());
        for (i, s) in map.spawns().iter().enumerate().skip(1) {
            if !grid.reached(&reach, s.position()) {
                violations.push(Violation::SpawnUnreachable { spawn: i });
            }
        }
    }
    ValidationReport { violations }
}

/// Fine grid over the map bounds; a cell is walkable when its center keeps
/// `radius` clearance from every wall.
pub(crate) struct OccupancyGrid<'a> {
    map: &'a WorldMap,
    origin: Vec2,
    nx: usize,
    ny: usize,
    radius: f64,
    clearance: Vec<f64>,
}

impl<'a> OccupancyGrid<'a> {
    pub(crate) fn new(map: &'a WorldMap, radius: f64) -> Self {
        let b = map.bounds();
        let margin = radius + 2.0 * CONNECTIVITY_CELL;
        let origin = Vec2::new(b.min.x - margin, b.min.y - margin);
        let nx = ((b.width() + 2.0 * margin) / CONNECTIVITY_CELL).ceil() as usize + 1;
        let ny = ((b.height() + 2.0 * margin) / CONNECTIVITY_CELL).ceil() as usize + 1;
        let mut grid = Self {
            map,
            origin,
            nx,
            ny,
            radius,
            clearance: Vec::new(),
        };
        let search = radius + CONNECTIVITY_CELL;
        grid.clearance = (0..nx * ny)
            .map(|c| wall_distance(map, grid.center(c % nx, c / nx), search))
            .collect();
        grid
    }

    fn center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * CONNECTIVITY_CELL,
            self.origin.y + (iy as f64 + 0.5) * CONNECTIVITY_CELL,
        )
    }

    fn walkable(&self, c: usize) -> bool {
        self.clearance[c] >= self.radius
    }

    fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let ix = ((p.x - self.origin.x) / CONNECTIVITY_CELL).floor();
        let iy = ((p.y - self.origin.y) / CONNECTIVITY_CELL).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.nx as f64 || iy >= self.ny as f64 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    /// Walkable cells at or next to `p`.
    fn seeds(&self, p: Vec2) -> Vec<usize> {
        let Some((ix, iy)) = self.cell_of(p) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let x = ix as i64 + dx;
                let y = iy as i64 + dy;
                if x < 0 || y < 0 || x >= self.nx as i64 || y >= self.ny as i64 {
                    continue;
                }
                let c = y as usize * self.nx + x as usize;
                if self.walkable(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn step_crosses_wall(&self, a: usize, b: usize) -> bool {
        // A wall between two cell centers is within half a cell of both.
        if self.clearance[a] > CONNECTIVITY_CELL && self.clearance[b] > CONNECTIVITY_CELL {
            return false;
        }
        let pa = self.center(a % self.nx, a / self.nx);
        let pb = self.center(b % self.nx, b / self.nx);
        let mut crosses = false;
        self.map.edge_grid().for_each_near((pa + pb) * 0.5, CONNECTIVITY_CELL, |idx| {
            if !crosses {
                let (u, w) = self.map.segment(idx as usize);
                crosses = segments_intersect(pa, pb, u, w);
            }
        });
        crosses
    }

    /// 4-connected flood fill from the cells around `start`.
    pub(crate) fn flood(&self, start: Vec2) -> Vec<bool> {
        let mut seen = vec![false; self.nx * self.ny];
        let mut queue = VecDeque::new();
        for c in self.seeds(start) {
            seen[c] = true;
            queue.push_back(c);
        }
        while let Some(c) = queue.pop_front() {
            let (ix, iy) = (c % self.nx, c / self.nx);
            let mut next = [None; 4];
            if ix > 0 {
                next[0] = Some(c - 1);
            }
            if ix + 1 < self.nx {
                next[1] = Some(c + 1);
            }
            if iy > 0 {
                next[2] = Some(c - self.nx);
            }
            if iy + 1 < self.ny {
                next[3] = Some(c + self.nx);
            }
            for n in next.into_iter().flatten() {
                if !seen[n] && self.walkable(n) && !self.step_crosses_wall(c, n) {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub(crate) fn reached(&self, flood: &[bool], p: Vec2) -> bool {
        self.seeds(p).into_iter().any(|c| flood[c])
    }
}
