use super::{
    palette_color, Frame, ObservationError, SpriteProjection, CEILING_COLOR, FLOOR_COLOR, SPRITE_ASPECT, SPRITE_WORLD_HEIGHT,
    WALL_WORLD_HEIGHT,
};
use crate::geometry::{column_offset, DepthReadout};

/// Pixels per unit of `1 / depth` for a view `width` pixels wide.
pub fn focal_length(width: usize, fov: f64) -> f64 {
    (width as f64 * 0.5) / libm::tan(fov * 0.5)
}

/// Converts per-column ray disparity to perpendicular disparity, removing the
/// fisheye bulge: `perp_distance = distance * cos(column angle)`.
pub fn fisheye_correct(disparity: &[f64], fov: f64) -> Vec<f64> {
    let k = disparity.len();
    disparity
        .iter()
        .enumerate()
        .map(|(j, d)| d / libm::cos(column_offset(j, k, fov)))
        .collect()
}

/// Gray level for a wall at `distance`: 200 up close, 40 at `max_range`.
pub fn wall_shade(distance: f64, max_range: f64) -> u8 {
    let t = (distance / max_range).clamp(0.0, 1.0);
    (40.0 + libm::round(160.0 * (1.0 - t))) as u8
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Draw every sprite in full, ignoring the depth buffer.
    pub ignore_occlusion: bool,
}

/// Reference renderer: walls, ceiling, floor and depth-tested billboards.
///
/// When `width != K`, frame column `x` shows readout column `x * K / width`
/// (integer division).
pub fn render_frame(readout: &DepthReadout, sprites: &[SpriteProjection], width: usize, height: usize) -> Result<Frame, ObservationError> {
    render_with(readout, sprites, width, height, RenderOptions::default())
}

#[allow(clippy::needless_range_loop)]
pub fn render_with(
    readout: &DepthReadout,
    sprites: &[SpriteProjection],
    width: usize,
    height: usize,
    opts: RenderOptions,
) -> Result<Frame, ObservationError> {
    if width == 0 || height == 0 {
        return Err(ObservationError::EmptyFrame(width, height));
    }
    let k = readout.columns();
    if k == 0 {
        return Err(ObservationError::EmptyReadout);
    }
    let fov = readout.fov;
    let focal = focal_length(width, fov);
    let h = height as f64;
    let mid = h * 0.5;
    let perp_disp = fisheye_correct(&readout.disparity, fov);

    let mut frame = Frame::filled(width, height, FLOOR_COLOR);
    let mut zbuf = vec![f64::INFINITY; width];
    for x in 0..width {
        let j = x * k / width;
        let hit = &readout.hits[j];
        let mut y0 = height;
        let mut y1 = height;
        if hit.edge_index.is_some() {
            let slice = WALL_WORLD_HEIGHT * focal * perp_disp[j];
            y0 = clamp_row(mid - slice * 0.5, height);
            y1 = clamp_row(mid + slice * 0.5, height);
            zbuf[x] = 1.0 / perp_disp[j];
        }
        let horizon = height / 2;
        let v = wall_shade(hit.distance, readout.max_range);
        for y in 0..height {
            let c = if y >= y0 && y < y1 {
                [v, v, v]
            } else if y < horizon {
                CEILING_COLOR
            } else {
                FLOOR_COLOR
            };
            frame.set(x, y, c);
        }
    }

    let mut order: Vec<&SpriteProjection> = sprites.iter().collect();
    order.sort_by(|a, b| b.distance.total_cmp(&a.distance).then_with(|| a.player_id.cmp(&b.player_id)));
    for s in order {
        draw_sprite(&mut frame, &zbuf, s, k, fov, focal, opts);
    }
    Ok(frame)
}

fn clamp_row(y: f64, height: usize) -> usize {
    libm::round(y).clamp(0.0, height as f64) as usize
}

#[allow(clippy::needless_range_loop)]
fn draw_sprite(frame: &mut Frame, zbuf: &[f64], s: &SpriteProjection, k: usize, fov: f64, focal: f64, opts: RenderOptions) {
    let width = frame.width;
    let height = frame.height;
    let bearing = fov * (0.5 - s.screen_column / k as f64);
    let perp = (s.distance * libm::cos(bearing)).max(1e-6);
    let tall = SPRITE_WORLD_HEIGHT * focal / perp;
    // Eye height is half a wall; the billboard stands on the floor.
    let bottom = height as f64 * 0.5 + 0.5 * WALL_WORLD_HEIGHT * focal / perp;
    let y1 = (libm::round(bottom).max(1.0) as usize).min(height);
    let y0 = (libm::round(bottom - tall).max(0.0) as usize).min(y1 - 1);

    let cx = s.screen_column * width as f64 / k as f64;
    let anchor = (libm::floor(cx).max(0.0) as usize).min(width - 1);
    let w = (libm::round(SPRITE_ASPECT * tall) as i64).max(1);
    let left = libm::round(cx - w as f64 * 0.5) as i64;
    let x0 = left.min(anchor as i64).max(0) as usize;
    let x1 = ((left + w).max(anchor as i64 + 1) as usize).min(width);

    let color = palette_color(&s.player_id);
    for x in x0..x1 {
        let shown = opts.ignore_occlusion
            || if x == anchor {
                s.anchor_depth >= s.distance
            } else {
                perp <= zbuf[x]
            };
        if shown {
            for y in y0..y1 {
                frame.set(x, y, color);
            }
        }
    }
}
