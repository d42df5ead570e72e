use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::geometry::{EdgeGrid, Vec2};

/// A spawn location and initial facing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl SpawnPoint {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Static vector level: vertices, undirected wall edges (zero-based vertex
/// indices) and spawn points.
///
/// Construction does not validate; use [`crate::level::validate_map`]. Query
/// methods assume every edge index is in range.
#[derive(Debug)]
pub struct WorldMap {
    name: String,
    vertices: Vec<Vec2>,
    edges: Vec<(usize, usize)>,
    spawns: Vec<SpawnPoint>,
    grid: OnceLock<EdgeGrid>,
}

impl Clone for WorldMap {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            spawns: self.spawns.clone(),
            grid: self.grid.clone(),
        }
    }
}

impl PartialEq for WorldMap {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.vertices == other.vertices && self.edges == other.edges && self.spawns == other.spawns
    }
}

impl WorldMap {
    pub fn new(name: impl Into<String>, vertices: Vec<Vec2>, edges: Vec<(usize, usize)>, spawns: Vec<SpawnPoint>) -> Self {
        Self {
            name: name.into(),
            vertices,
            edges,
            spawns,
            grid: OnceLock::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn spawns(&self) -> &[SpawnPoint] {
        &self.spawns
    }

    /// Endpoints of edge `i`. Panics if the edge references a missing vertex.
    pub fn segment(&self, i: usize) -> (Vec2, Vec2) {
        let (u, w) = self.edges[i];
        (self.vertices[u], self.vertices[w])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        (0..self.edges.len()).map(|i| self.segment(i))
    }

    /// Bounding rectangle of all vertices and spawn points.
    pub fn bounds(&self) -> Bounds {
        let mut pts = self.vertices.iter().copied().chain(self.spawns.iter().map(SpawnPoint::position));
        let Some(first) = pts.next() else {
            return Bounds {
                min: Vec2::ZERO,
                max: Vec2::ZERO,
            };
        };
        let (min, max) = pts.fold((first, first), |(lo, hi), p| {
            (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y)))
        });
        Bounds { min, max }
    }

    /// Spatial index over the edges, built on first use. Out-of-range and
    /// zero-length edges are left out of the index.
    pub fn edge_grid(&self) -> &EdgeGrid {
        self.grid.get_or_init(|| {
            let n = self.vertices.len();
            let segs: Vec<(u32, Vec2, Vec2)> = self
                .edges
                .iter()
                .enumerate()
                .filter(|(_, &(u, w))| u < n && w < n && self.vertices[u] != self.vertices[w])
                .map(|(i, &(u, w))| (i as u32, self.vertices[u], self.vertices[w]))
                .collect();
            EdgeGrid::build(&segs)
        })
    }
}
