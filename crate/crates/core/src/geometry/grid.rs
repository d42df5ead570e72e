use super::Vec2;

/// Uniform grid over the map's wall segments.
///
/// Each cell lists every edge whose segment comes within a small padding of
/// the cell rectangle, so a point on an edge is always covered by the cell the
/// traversal places it in, including at cell corners.
#[derive(Clone, Debug, Default)]
pub struct EdgeGrid {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    cell_start: Vec<u32>,
    items: Vec<u32>,
}

const MAX_CELLS_PER_AXIS: usize = 256;

impl EdgeGrid {
    /// Builds the index from `(edge_index, a, b)` triples.
    pub fn build(segments: &[(u32, Vec2, Vec2)]) -> Self {
        if segments.is_empty() {
            return Self::default();
        }
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(_, a, b) in segments {
            for p in [a, b] {
                min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
                max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
            }
        }
        let span = (max.x - min.x).max(max.y - min.y).max(1.0);
        let margin = span * 1e-6 + 1e-6;
        min = Vec2::new(min.x - margin, min.y - margin);
        max = Vec2::new(max.x + margin, max.y + margin);
        let w = max.x - min.x;
        let h = max.y - min.y;

        let target_cells = (segments.len() * 2).max(1) as f64;
        let cell = (w * h / target_cells).sqrt().max(w.max(h) / MAX_CELLS_PER_AXIS as f64).max(1e-3);
        let nx = ((w / cell).ceil() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let ny = ((h / cell).ceil() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let cell = (w / nx as f64).max(h / ny as f64);
        let pad = 1e-7 + cell * 1e-9;

        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        for &(idx, a, b) in segments {
            let lo_x = a.x.min(b.x) - pad;
            let hi_x = a.x.max(b.x) + pad;
            let lo_y = a.y.min(b.y) - pad;
            let hi_y = a.y.max(b.y) + pad;
            let (ix0, ix1) = axis_span(lo_x, hi_x, min.x, cell, nx);
            let (iy0, iy1) = axis_span(lo_y, hi_y, min.y, cell, ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    let cmin = Vec2::new(min.x + ix as f64 * cell - pad, min.y + iy as f64 * cell - pad);
                    let cmax = Vec2::new(cmin.x + cell + 2.0 * pad, cmin.y + cell + 2.0 * pad);
                    if segment_touches_rect(a, b, cmin, cmax) {
                        buckets[iy * nx + ix].push(idx);
                    }
                }
            }
        }

        let mut cell_start = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        for bucket in &buckets {
            cell_start.push(items.len() as u32);
            items.extend_from_slice(bucket);
        }
        cell_start.push(items.len() as u32);

        Self {
            origin: min,
            cell,
            nx,
            ny,
            cell_start,
            items,
        }
    }

    fn cell_items(&self, ix: usize, iy: usize) -> &[u32] {
        let c = iy * self.nx + ix;
        &self.items[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
    }

    /// Visits the cells pierced by the ray `origin + t * dir` for
    /// `t in [0, max_t]`, in order. The callback receives the cell's edges and
    /// the ray parameter at which the ray leaves the cell; returning `false`
    /// stops the walk.
    pub fn walk(&self, origin: Vec2, dir: Vec2, max_t: f64, mut f: impl FnMut(&[u32], f64) -> bool) {
        if self.nx == 0 {
            return;
        }
        let max = Vec2::new(
            self.origin.x + self.nx as f64 * self.cell,
            self.origin.y + self.ny as f64 * self.cell,
        );
        let mut t0 = 0.0f64;
        let mut t1 = max_t;
        for (o, d, lo, hi) in [(origin.x, dir.x, self.origin.x, max.x), (origin.y, dir.y, self.origin.y, max.y)] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return;
                }
            } else {
                let ta = (lo - o) / d;
                let tb = (hi - o) / d;
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        if t0 > t1 {
            return;
        }

        let start = origin + dir * t0;
        let mut ix = cell_index(start.x, self.origin.x, self.cell, self.nx);
        let mut iy = cell_index(start.y, self.origin.y, self.cell, self.ny);

        let setup = |i: usize, o: f64, d: f64, base: f64| -> (isize, f64, f64) {
            if d > 0.0 {
                (1, (base + (i + 1) as f64 * self.cell - o) / d, self.cell / d)
            } else if d < 0.0 {
                (-1, (base + i as f64 * self.cell - o) / d, -self.cell / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, mut t_max_x, dt_x) = setup(ix, origin.x, dir.x, self.origin.x);
        let (step_y, mut t_max_y, dt_y) = setup(iy, origin.y, dir.y, self.origin.y);

        loop {
            let t_exit = t_max_x.min(t_max_y);
            if !f(self.cell_items(ix, iy), t_exit) || t_exit > t1 {
                return;
            }
            if t_max_x < t_max_y {
                let next = ix as isize + step_x;
                if next < 0 || next >= self.nx as isize {
                    return;
                }
                ix = next as usize;
                t_max_x += dt_x;
            } else {
                let next = iy as isize + step_y;
                if next < 0 || next >= self.ny as isize {
                    return;
                }
                iy = next as usize;
                t_max_y += dt_y;
            }
        }
    }

    /// Calls `f` for every edge listed in a cell overlapping the square of
    /// half-width `radius` around `center`. Edges may repeat.
    pub fn for_each_near(&self, center: Vec2, radius: f64, mut f: impl FnMut(u32)) {
        if self.nx == 0 {
            return;
        }
        let max_x = self.origin.x + self.nx as f64 * self.cell;
        let max_y = self.origin.y + self.ny as f64 * self.cell;
        if center.x + radius < self.origin.x || center.x - radius > max_x || center.y + radius < self.origin.y || center.y - radius > max_y
        {
            return;
        }
        let (ix0, ix1) = axis_span(center.x - radius, center.x + radius, self.origin.x, self.cell, self.nx);
        let (iy0, iy1) = axis_span(center.y - radius, center.y + radius, self.origin.y, self.cell, self.ny);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                for &e in self.cell_items(ix, iy) {
                    f(e);
                }
            }
        }
    }
}

fn cell_index(v: f64, base: f64, cell: f64, n: usize) -> usize {
    let i = ((v - base) / cell).floor();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

fn axis_span(lo: f64, hi: f64, base: f64, cell: f64, n: usize) -> (usize, usize) {
    (cell_index(lo, base, cell, n), cell_index(hi, base, cell, n))
}

/// Liang-Barsky clip of segment `[a, b]` against an axis-aligned rectangle.
fn segment_touches_rect(a: Vec2, b: Vec2, min: Vec2, max: Vec2) -> bool {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [(-d.x, a.x - min.x), (d.x, max.x - a.x), (-d.y, a.y - min.y), (d.y, max.y - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}
