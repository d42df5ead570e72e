//! Observation backends and the reference raycast renderer.
//!
//! Screen convention: column 0 is the viewer's leftmost column, i.e. the
//! largest bearing. A sprite at bearing `b` sits at fractional column
//! `K * (0.5 - b / fov)`.

mod backend;
mod frame;
mod render;

pub use backend::{backend_by_name, NoOcclusionBackend, NoSpritesBackend, ObservationBackend, RaycastBackend, BACKEND_NAMES};
pub use frame::{Frame, ObservationContext, Rgb};
pub use render::{fisheye_correct, focal_length, render_frame, render_with, wall_shade, RenderOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cast_depth, depth_readout, is_visible, DepthReadout, GeometryError, Ray, ViewConfig};
use crate::world::{PlayerId, WorldError, WorldState};

pub const WALL_WORLD_HEIGHT: f64 = 1.0;
pub const SPRITE_WORLD_HEIGHT: f64 = 0.7;
/// Billboard width as a fraction of its projected height.
pub const SPRITE_ASPECT: f64 = 0.6;
pub const DEFAULT_WIDTH: usize = 320;
pub const DEFAULT_HEIGHT: usize = 200;
pub const DEFAULT_CONTEXT_FRAMES: usize = 4;

pub const CEILING_COLOR: Rgb = [60, 70, 100];
pub const FLOOR_COLOR: Rgb = [100, 84, 64];

/// Opponent colors. Saturated and never gray, so they cannot collide with
/// walls, ceiling or floor.
pub const PALETTE: [Rgb; 8] = [
    [220, 40, 40],
    [40, 90, 230],
    [40, 200, 60],
    [235, 210, 30],
    [210, 50, 210],
    [30, 210, 210],
    [245, 140, 20],
    [130, 60, 200],
];

/// Palette slot: `pN` maps to `(N - 1) mod 8`, other ids to FNV-1a mod 8.
pub fn palette_index(id: &PlayerId) -> usize {
    let s = id.as_str();
    if let Some(n) = s.strip_prefix('p').and_then(|d| d.parse::<u64>().ok()) {
        if n >= 1 && !s[1..].starts_with('0') {
            return ((n - 1) % PALETTE.len() as u64) as usize;
        }
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h % PALETTE.len() as u64) as usize
}

pub fn palette_color(id: &PlayerId) -> Rgb {
    PALETTE[palette_index(id)]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservationError {
    #[error("frame dimensions must be positive, got {0}x{1}")]
    EmptyFrame(usize, usize),
    #[error("readout has no columns")]
    EmptyReadout,
    #[error("frame is {found:?}, context expects {expected:?}")]
    FrameSize { expected: (usize, usize), found: (usize, usize) },
    #[error("ppm: {0}")]
    Ppm(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Another player projected into a viewer's screen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteProjection {
    pub player_id: PlayerId,
    /// Fractional readout column of the target center.
    pub screen_column: f64,
    pub distance: f64,
    /// Projected height in pixels for a frame `K` pixels wide.
    pub scale: f64,
    /// Wall depth along the exact bearing of the target. Not less than
    /// `distance` when the target is in line of sight.
    #[serde(skip)]
    pub anchor_depth: f64,
}

/// Everything one viewer can know this tick.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewReadout {
    pub depth: DepthReadout,
    /// Opponents passing the range, cone and line-of-sight tests.
    pub sprites: Vec<SpriteProjection>,
    /// Opponents in range and cone whose line of sight is blocked.
    pub hidden: Vec<SpriteProjection>,
}

/// Depth readout plus sprite projections for `viewer`, from a snapshot.
pub fn viewpoint_readout(state: &WorldState, viewer: &PlayerId, view: &ViewConfig) -> Result<ViewReadout, ObservationError> {
    let me = state.player(viewer).ok_or_else(|| WorldError::UnknownPlayer(viewer.clone()))?;
    if !me.is_active() {
        return Err(WorldError::NotActive(viewer.clone()).into());
    }
    let depth = depth_readout(state.map(), &me.pose, view)?;
    let origin = me.pose.position();
    let k = view.columns as f64;
    let focal = focal_length(view.columns, view.fov);
    let half = view.fov * 0.5;

    let mut sprites = Vec::new();
    let mut hidden = Vec::new();
    for other in state.active_players().filter(|p| p.id != *viewer) {
        let target = other.pose.position();
        let offset = target - origin;
        let distance = offset.length();
        if distance <= 0.0 || distance > view.max_range {
            continue;
        }
        let bearing = crate::dynamics::wrap_angle_unchecked(offset.angle() - me.pose.theta());
        if bearing.abs() > half {
            continue;
        }
        let visible = is_visible(state.map(), &me.pose, target, view.fov, view.max_range);
        let perp = distance * libm::cos(bearing);
        let wall = cast_depth(state.map(), &Ray::from_angle(origin, me.pose.theta() + bearing), view.max_range).distance;
        let proj = SpriteProjection {
            player_id: other.id.clone(),
            screen_column: k * (0.5 - bearing / view.fov),
            distance,
            scale: SPRITE_WORLD_HEIGHT * focal / perp,
            anchor_depth: if visible { wall.max(distance) } else { wall },
        };
        if visible {
            sprites.push(proj);
        } else {
            hidden.push(proj);
        }
    }
    Ok(ViewReadout { depth, sprites, hidden })
}
