//! Deterministic world engine built around an explicit, shared world memory.
//!
//! * [`world`] holds the static vector map and the evolving player set.
//! * [`geometry`] answers per-viewpoint questions: depth readouts, line of
//!   sight and visibility.
//! * [`dynamics`] advances the world one tick from discrete actions.
//! * [`observation`] turns readouts into frames through a pluggable backend,
//!   with a raycast renderer as the reference.
//! * [`level`] generates, validates, stores and draws maps.
//! * [`replay`] records and re-runs sessions; [`metrics`] scores opponent
//!   presence in rendered frames against geometric ground truth.

pub mod bot;
pub mod dynamics;
pub mod fixtures;
pub mod geometry;
pub mod level;
pub mod metrics;
pub mod observation;
pub mod replay;
pub mod rng;
pub mod world;

pub use dynamics::{Action, ActionSet, Event, MotionConfig};
pub use geometry::{Vec2, ViewConfig};
pub use world::{new_world, PlayerId, Pose, Snapshot, WorldMap, WorldState};
