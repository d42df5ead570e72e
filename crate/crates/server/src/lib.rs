//! Authoritative multiplayer server: a fixed-rate tick loop owns the shared
//! world, collects one action per player per tick, advances, and sends each
//! player a readout of the post-advance snapshot over newline-delimited JSON.

pub mod client;
pub mod engine;
pub mod protocol;
pub mod server;

pub use engine::{RenderMode, TickEngine, TickOutput};
pub use protocol::{ClientMessage, ErrorCode, ServerMessage, TickUpdate, PROTOCOL_VERSION};
pub use server::{percentile, run_server, start, ServerError, ServerHandle, ServerSummary, SessionConfig, TickStats};
