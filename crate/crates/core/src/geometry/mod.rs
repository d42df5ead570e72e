//! Continuous 2D geometry over the vector map: ray casts, depth readouts,
//! line of sight, field-of-view visibility and circle clearance.
//!
//! Screen convention used everywhere (readout, renderer, clients): column 0
//! is the leftmost screen column and looks along the largest bearing, i.e.
//! column `j` of `k` casts at `theta + fov * (0.5 - (j + 0.5) / k)`.

mod grid;

pub use grid::EdgeGrid;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Pose, WorldMap};

/// Tolerance for endpoint-inclusive intersection tests, in world units.
pub const HIT_EPSILON: f64 = 1e-9;
/// Disparity clamp: distances below this are treated as this.
pub const D_MIN: f64 = 1e-3;

pub const DEFAULT_FOV: f64 = std::f64::consts::FRAC_PI_2;
pub const DEFAULT_COLUMNS: usize = 320;
pub const DEFAULT_MAX_RANGE: f64 = 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("ray direction must be finite and non-zero")]
    BadDirection,
    #[error("invalid view parameters: {0}")]
    InvalidView(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from +x, counter-clockwise.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(libm::cos(angle), libm::sin(angle))
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        libm::sqrt(self.length_squared())
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (o - self).length()
    }

    /// Rotated by -90 degrees, i.e. "to the right" of a facing direction.
    pub fn right(self) -> Self {
        Self::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Bearing of this vector in radians, in `(-pi, pi]`.
    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Half-line with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    origin: Vec2,
    direction: Vec2,
}

impl Ray {
    /// Normalizes `direction`; fails if it is zero or non-finite.
    pub fn new(origin: Vec2, direction: Vec2) -> Result<Self, GeometryError> {
        let len = direction.length();
        if !len.is_finite() || len <= 0.0 {
            return Err(GeometryError::BadDirection);
        }
        Ok(Self {
            origin,
            direction: direction * (1.0 / len),
        })
    }

    pub fn from_angle(origin: Vec2, angle: f64) -> Self {
        Self {
            origin,
            direction: Vec2::from_angle(angle),
        }
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.origin + self.direction * t
    }
}

/// Result of a depth cast. A miss has `edge_index == None` and
/// `distance == max_range`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub edge_index: Option<usize>,
    pub point: Vec2,
}

/// Distance along `ray` to the segment `[a, b]`, endpoints included.
///
/// A collinear overlap reports the nearest overlapped point; an origin lying
/// on the segment reports 0.
pub fn ray_segment_intersection(ray: &Ray, a: Vec2, b: Vec2) -> Result<Option<f64>, GeometryError> {
    if (b - a).length() < HIT_EPSILON {
        return Err(GeometryError::DegenerateSegment);
    }
    Ok(intersect(ray, a, b))
}

/// Unchecked core of [`ray_segment_intersection`]; `a != b` is assumed.
pub(crate) fn intersect(ray: &Ray, a: Vec2, b: Vec2) -> Option<f64> {
    let d = ray.direction;
    let e = b - a;
    let w = a - ray.origin;
    let len_e = e.length();
    let denom = d.cross(e);

    if denom.abs() <= 1e-12 * len_e {
        // Parallel. Only a collinear segment can be hit.
        if w.cross(d).abs() > HIT_EPSILON {
            return None;
        }
        let ta = w.dot(d);
        let tb = (b - ray.origin).dot(d);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        if hi < -HIT_EPSILON {
            return None;
        }
        return Some(lo.max(0.0));
    }

    let t = w.cross(e) / denom;
    let s = w.cross(d) / denom;
    let eps_s = HIT_EPSILON / len_e;
    if s < -eps_s || s > 1.0 + eps_s || t < -HIT_EPSILON {
        return None;
    }
    Some(t.max(0.0))
}

/// Nearest wall along `ray`, clipped to `max_range`. Ties between edges at
/// the same distance go to the smaller edge index.
pub fn cast_depth(map: &WorldMap, ray: &Ray, max_range: f64) -> Hit {
    let mut best: Option<(f64, usize)> = None;
    map.edge_grid().walk(ray.origin, ray.direction, max_range, |cell_edges, t_exit| {
        for &idx in cell_edges {
            let idx = idx as usize;
            let (a, b) = map.segment(idx);
            if let Some(t) = intersect(ray, a, b) {
                if t > max_range {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bt, bi)) => t < bt || (t == bt && idx < bi),
                };
                if better {
                    best = Some((t, idx));
                }
            }
        }
        // Anything hit strictly inside this cell beats every later cell.
        !matches!(best, Some((bt, _)) if bt + HIT_EPSILON < t_exit)
    });
    match best {
        Some((t, idx)) => Hit {
            distance: t,
            edge_index: Some(idx),
            point: ray.at(t),
        },
        None => Hit {
            distance: max_range,
            edge_index: None,
            point: ray.at(max_range),
        },
    }
}

/// View parameters shared by readouts, visibility and rendering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub fov: f64,
    pub columns: usize,
    pub max_range: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            fov: DEFAULT_FOV,
            columns: DEFAULT_COLUMNS,
            max_range: DEFAULT_MAX_RANGE,
        }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(GeometryError::InvalidView(format!("fov {} outside (0, pi)", self.fov)));
        }
        if self.columns == 0 {
            return Err(GeometryError::InvalidView("column count must be at least 1".into()));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(GeometryError::InvalidView(format!("max_range {} must be positive", self.max_range)));
        }
        Ok(())
    }
}

/// Angle of column `j` relative to the view axis (positive = viewer-left).
pub fn column_offset(j: usize, columns: usize, fov: f64) -> f64 {
    fov * (0.5 - (j as f64 + 0.5) / columns as f64)
}

/// Per-column depth and disparity across the field of view.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthReadout {
    pub fov: f64,
    pub max_range: f64,
    pub hits: Vec<Hit>,
    pub disparity: Vec<f64>,
}

impl DepthReadout {
    pub fn columns(&self) -> usize {
        self.hits.len()
    }

    /// A readout where every column misses.
    pub fn all_miss(fov: f64, columns: usize, max_range: f64) -> Self {
        Self {
            fov,
            max_range,
            hits: vec![
                Hit {
                    distance: max_range,
                    edge_index: None,
                    point: Vec2::ZERO,
                };
                columns
            ],
            disparity: vec![disparity(max_range); columns],
        }
    }
}

pub fn disparity(distance: f64) -> f64 {
    1.0 / distance.max(D_MIN)
}

pub fn depth_readout(map: &WorldMap, pose: &Pose, view: &ViewConfig) -> Result<DepthReadout, GeometryError> {
    view.validate()?;
    let origin = pose.position();
    let hits: Vec<Hit> = (0..view.columns)
        .map(|j| {
            let angle = pose.theta() + column_offset(j, view.columns, view.fov);
            cast_depth(map, &Ray::from_angle(origin, angle), view.max_range)
        })
        .collect();
    let disparity = hits.iter().map(|h| disparity(h.distance)).collect();
    Ok(DepthReadout {
        fov: view.fov,
        max_range: view.max_range,
        hits,
        disparity,
    })
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.length_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    p.distance(a + e * s)
}

/// Point-to-segment distance minus `radius`; negative means penetration.
pub fn circle_segment_distance(center: Vec2, radius: f64, a: Vec2, b: Vec2) -> Result<f64, GeometryError> {
    if (b - a).length() < HIT_EPSILON {
        return Err(GeometryError::DegenerateSegment);
    }
    Ok(point_segment_distance(center, a, b) - radius)
}

/// Whether the wall `[a, b]` blocks the open segment `(p, q)`. Touching a wall
/// endpoint within [`HIT_EPSILON`] counts as blocked.
fn segment_blocked(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> bool {
    let r = q - p;
    let e = b - a;
    let len_r = r.length();
    let len_e = e.length();
    let w = a - p;
    let denom = r.cross(e);

    // Wall endpoints grazing the open segment.
    for end in [a, b] {
        let s = (end - p).dot(r) / (len_r * len_r);
        if s > 0.0 && s < 1.0 && point_segment_distance(end, p, q) <= HIT_EPSILON {
            return true;
        }
    }

    if denom.abs() <= 1e-12 * len_r * len_e {
        if w.cross(r).abs() / len_r > HIT_EPSILON {
            return false;
        }
        let ta = w.dot(r) / (len_r * len_r);
        let tb = (b - p).dot(r) / (len_r * len_r);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        return lo.max(0.0) < hi.min(1.0);
    }

    let t = w.cross(e) / denom;
    let s = w.cross(r) / denom;
    let eps_s = HIT_EPSILON / len_e;
    t > 0.0 && t < 1.0 && s >= -eps_s && s <= 1.0 + eps_s
}

/// True iff the open segment `(p, q)` crosses no wall.
pub fn line_of_sight(map: &WorldMap, p: Vec2, q: Vec2) -> bool {
    // Fixed endpoint order makes the predicate exactly symmetric.
    let (p, q) = if (p.x, p.y) <= (q.x, q.y) { (p, q) } else { (q, p) };
    let r = q - p;
    let len = r.length();
    if len == 0.0 {
        return true;
    }
    let dir = r * (1.0 / len);
    let mut clear = true;
    map.edge_grid().walk(p, dir, len, |cell_edges, _| {
        for &idx in cell_edges {
            let (a, b) = map.segment(idx as usize);
            if segment_blocked(p, q, a, b) {
                clear = false;
                return false;
            }
        }
        true
    });
    clear
}

/// Range, field-of-view cone and line-of-sight test from `viewer` to `target`.
/// A target coinciding with the viewer has no bearing and is not visible.
pub fn is_visible(map: &WorldMap, viewer: &Pose, target: Vec2, fov: f64, max_range: f64) -> bool {
    let offset = target - viewer.position();
    let dist = offset.length();
    if dist <= 0.0 || dist > max_range {
        return false;
    }
    let rel = crate::dynamics::wrap_angle_unchecked(offset.angle() - viewer.theta());
    if rel.abs() > fov * 0.5 {
        return false;
    }
    line_of_sight(map, viewer.position(), target)
}

/// Smallest distance from `center` to any wall, or infinity for a wall-less map.
pub fn wall_distance(map: &WorldMap, center: Vec2, search_radius: f64) -> f64 {
    let mut best = f64::INFINITY;
    map.edge_grid().for_each_near(center, search_radius, |idx| {
        let (a, b) = map.segment(idx as usize);
        best = best.min(point_segment_distance(center, a, b));
    });
    best
}

/// Whether the closed segments `[p, q]` and `[a, b]` intersect (used to stop
/// movement from tunnelling through walls).
pub fn segments_intersect(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> bool {
    let r = q - p;
    let e = b - a;
    let o1 = r.cross(a - p);
    let o2 = r.cross(b - p);
    let o3 = e.cross(p - a);
    let o4 = e.cross(q - a);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    let on = |u: Vec2, v: Vec2, x: Vec2| point_segment_distance(x, u, v) <= HIT_EPSILON;
    on(p, q, a) || on(p, q, b) || on(a, b, p) || on(a, b, q)
}
