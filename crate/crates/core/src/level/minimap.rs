use crate::geometry::Vec2;
use crate::observation::{palette_color, Frame, Rgb};
use crate::world::{PlayerId, Pose, WorldMap};

pub const MINIMAP_BACKGROUND: Rgb = [20, 20, 24];
pub const MINIMAP_WALL: Rgb = [230, 230, 230];
/// Border in pixels around the map bounds.
pub const MINIMAP_PADDING: usize = 4;

/// Top-down orthographic view; world y points up the image.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimapImage {
    pub frame: Frame,
    pub scale: f64,
    pub origin: Vec2,
}

impl MinimapImage {
    /// Fractional pixel coordinates of a world point.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        project(self.origin, self.scale, self.frame.height, p)
    }
}

fn project(origin: Vec2, scale: f64, height: usize, p: Vec2) -> (f64, f64) {
    let px = MINIMAP_PADDING as f64 + (p.x - origin.x) * scale;
    let py = (height - 1 - MINIMAP_PADDING) as f64 - (p.y - origin.y) * scale;
    (px, py)
}

/// Draws walls as 1-pixel lines and each pose as a 5-pixel arrowhead in its
/// player's palette color. Panics if `scale` is not positive.
pub fn rasterize_minimap(map: &WorldMap, poses: &[(PlayerId, Pose)], scale: f64) -> MinimapImage {
    assert!(scale > 0.0 && scale.is_finite(), "minimap scale must be positive");
    let b = map.bounds();
    let width = (b.width() * scale).ceil() as usize + 2 * MINIMAP_PADDING + 1;
    let height = (b.height() * scale).ceil() as usize + 2 * MINIMAP_PADDING + 1;
    let mut frame = Frame::filled(width, height, MINIMAP_BACKGROUND);
    let pixel = |p: Vec2| {
        let (x, y) = project(b.min, scale, height, p);
        (libm::floor(x) as i64, libm::floor(y) as i64)
    };

    let mut degree = vec![0usize; map.vertices().len()];
    for &(u, w) in map.edges() {
        degree[u] += 1;
        degree[w] += 1;
        let (a, z) = (pixel(map.vertices()[u]), pixel(map.vertices()[w]));
        draw_line(&mut frame, a, z, MINIMAP_WALL);
    }
    // Lines omit their last pixel; close the corners where walls meet.
    for (i, v) in map.vertices().iter().enumerate() {
        if degree[i] >= 2 {
            let (x, y) = pixel(*v);
            put(&mut frame, x, y, MINIMAP_WALL);
        }
    }

    for (id, pose) in poses {
        let color = palette_color(id);
        let (cx, cy) = project(b.min, scale, height, pose.position());
        let (cx, cy) = (libm::floor(cx) as i64, libm::floor(cy) as i64);
        for (dx, dy) in arrow_offsets(pose.theta()) {
            put(&mut frame, cx + dx, cy + dy, color);
        }
    }
    MinimapImage {
        frame,
        scale,
        origin: b.min,
    }
}

/// Pixel offsets of the arrowhead: tip two pixels ahead, two barbs behind.
pub fn arrow_offsets(theta: f64) -> [(i64, i64); 5] {
    // Image rows grow downward, so the facing's y component flips.
    let f = (libm::cos(theta), -libm::sin(theta));
    let r = (-f.1, f.0);
    let round = |x: f64, y: f64| (libm::round(x) as i64, libm::round(y) as i64);
    [
        (0, 0),
        round(f.0, f.1),
        round(2.0 * f.0, 2.0 * f.1),
        round(-f.0 + r.0, -f.1 + r.1),
        round(-f.0 - r.0, -f.1 - r.1),
    ]
}

fn put(frame: &mut Frame, x: i64, y: i64, c: Rgb) {
    if x >= 0 && y >= 0 && (x as usize) < frame.width && (y as usize) < frame.height {
        frame.set(x as usize, y as usize, c);
    }
}

/// Half-open DDA line from `a` up to, not including, `b`.
fn draw_line(frame: &mut Frame, a: (i64, i64), b: (i64, i64), c: Rgb) {
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    let steps = dx.abs().max(dy.abs());
    for i in 0..steps {
        let x = a.0 as f64 + dx as f64 * i as f64 / steps as f64;
        let y = a.1 as f64 + dy as f64 * i as f64 / steps as f64;
        put(frame, libm::round(x) as i64, libm::round(y) as i64, c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::SpawnPoint;
    use std::collections::BTreeSet;
    use std::f64::consts::PI;

    #[test]
    fn empty_map_is_uniform() {
        let map = WorldMap::new("e", vec![], vec![], vec![]);
        let img = rasterize_minimap(&map, &[], 3.0);
        assert_eq!(img.frame.count_color(MINIMAP_BACKGROUND), img.frame.width * img.frame.height);
    }

    #[test]
    fn ten_unit_wall_at_scale_two_is_twenty_pixels() {
        let map = WorldMap::new(
            "w",
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)],
            vec![(0, 1)],
            vec![SpawnPoint::new(5.0, 3.0, 0.0)],
        );
        let img = rasterize_minimap(&map, &[], 2.0);
        assert_eq!(img.frame.count_color(MINIMAP_WALL), 20);
        let rows: BTreeSet<usize> = (0..img.frame.height)
            .filter(|&y| (0..img.frame.width).any(|x| img.frame.get(x, y) == MINIMAP_WALL))
            .collect();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn opposite_arrows_mirror() {
        let a: BTreeSet<_> = arrow_offsets(0.0).into_iter().collect();
        let b: BTreeSet<_> = arrow_offsets(PI).into_iter().map(|(x, y)| (-x, y)).collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn vertices_project_inside() {
        let map = crate::level::generate_map(&crate::level::LevelSpec::with_seed(4)).unwrap();
        let img = rasterize_minimap(&map, &[], 1.5);
        for v in map.vertices() {
            let (x, y) = img.project(*v);
            assert!(x >= 0.0 && y >= 0.0 && x < img.frame.width as f64 && y < img.frame.height as f64);
        }
    }

    #[test]
    fn arrow_uses_palette() {
        let map = WorldMap::new(
            "w",
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)],
            vec![(0, 1)],
            vec![SpawnPoint::new(5.0, 3.0, 0.0)],
        );
        let id = PlayerId::new("p1");
        let img = rasterize_minimap(&map, &[(id.clone(), Pose::new(5.0, 3.0, 0.0))], 2.0);
        assert_eq!(img.frame.count_color(palette_color(&id)), 5);
    }
}
