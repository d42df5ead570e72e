use super::render::{render_with, RenderOptions};
use super::{Frame, ObservationContext, ObservationError, ViewReadout};
use crate::dynamics::Action;

/// Maps (context, readout, action) to the next frame. The reference raycast
/// backend ignores context and action; a learned renderer would not.
pub trait ObservationBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn observe(
        &self,
        context: &ObservationContext,
        view: &ViewReadout,
        action: &Action,
        width: usize,
        height: usize,
    ) -> Result<Frame, ObservationError>;
}

/// Reference renderer: visible sprites with depth testing.
#[derive(Clone, Copy, Debug, Default)]
pub struct RaycastBackend;

impl ObservationBackend for RaycastBackend {
    fn name(&self) -> &'static str {
        "reference"
    }

    fn observe(
        &self,
        _: &ObservationContext,
        view: &ViewReadout,
        _: &Action,
        width: usize,
        height: usize,
    ) -> Result<Frame, ObservationError> {
        render_with(&view.depth, &view.sprites, width, height, RenderOptions::default())
    }
}

/// Degraded backend that never draws opponents.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSpritesBackend;

impl ObservationBackend for NoSpritesBackend {
    fn name(&self) -> &'static str {
        "no-sprites"
    }

    fn observe(
        &self,
        _: &ObservationContext,
        view: &ViewReadout,
        _: &Action,
        width: usize,
        height: usize,
    ) -> Result<Frame, ObservationError> {
        render_with(&view.depth, &[], width, height, RenderOptions::default())
    }
}

/// Degraded backend that draws every opponent in range and cone, walls or not.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoOcclusionBackend;

impl ObservationBackend for NoOcclusionBackend {
    fn name(&self) -> &'static str {
        "no-occlusion"
    }

    fn observe(
        &self,
        _: &ObservationContext,
        view: &ViewReadout,
        _: &Action,
        width: usize,
        height: usize,
    ) -> Result<Frame, ObservationError> {
        let all: Vec<_> = view.sprites.iter().chain(&view.hidden).cloned().collect();
        render_with(&view.depth, &all, width, height, RenderOptions { ignore_occlusion: true })
    }
}

pub const BACKEND_NAMES: [&str; 3] = ["reference", "no-sprites", "no-occlusion"];

pub fn backend_by_name(name: &str) -> Option<Box<dyn ObservationBackend>> {
    match name {
        "reference" => Some(Box::new(RaycastBackend)),
        "no-sprites" => Some(Box::new(NoSpritesBackend)),
        "no-occlusion" => Some(Box::new(NoOcclusionBackend)),
        _ => None,
    }
}
