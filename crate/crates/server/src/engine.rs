//! The synchronous tick cycle: advance, per-player readouts over the
//! post-advance snapshot, and serialization of every tick update.

use std::collections::BTreeMap;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use worldmem_core::observation::{viewpoint_readout, ObservationBackend, ObservationContext, RaycastBackend, DEFAULT_CONTEXT_FRAMES};
use worldmem_core::replay::{Session, StepOutcome};
use worldmem_core::world::{PlayerState, PlayerStatus};
use worldmem_core::{ActionSet, Event, MotionConfig, PlayerId, Snapshot, ViewConfig, WorldState};

use crate::protocol::{encode, FixedDisparity, ServerMessage, TickUpdate, WirePose, WireStatus};

/// What each tick update carries besides the readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Disparity columns and sprites only.
    #[default]
    Readout,
    /// Also a base64 PPM of the reference rendering.
    Frames,
}

impl FromStr for RenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "readout" => Ok(RenderMode::Readout),
            "frames" => Ok(RenderMode::Frames),
            _ => Err(format!("unknown render mode {s:?} (expected readout or frames)")),
        }
    }
}

/// Result of one [`TickEngine::run_tick`].
pub struct TickOutput {
    pub outcome: StepOutcome,
    pub snapshot: Snapshot,
    /// Canonical hash of `snapshot`, as embedded in every update.
    pub hash: String,
    /// One encoded wire line per player present after the tick.
    pub updates: Vec<(PlayerId, String)>,
}

pub struct TickEngine {
    session: Session,
    view: ViewConfig,
    mode: RenderMode,
    frame_size: (usize, usize),
    contexts: BTreeMap<PlayerId, ObservationContext>,
}

impl TickEngine {
    pub fn new(state: WorldState, motion: MotionConfig, view: ViewConfig, mode: RenderMode, frame_size: (usize, usize)) -> Self {
        Self {
            session: Session::new(state, motion),
            view,
            mode,
            frame_size,
            contexts: BTreeMap::new(),
        }
    }

    pub fn state(&self) -> &WorldState {
        self.session.state()
    }

    pub fn motion(&self) -> &MotionConfig {
        self.session.motion()
    }

    pub fn view(&self) -> &ViewConfig {
        &self.view
    }

    /// Applies leaves and joins, advances, then builds every player's
    /// update from the one post-advance snapshot.
    pub fn run_tick(&mut self, leaves: &[PlayerId], joins: &[PlayerId], actions: &ActionSet) -> TickOutput {
        let outcome = self.session.step(leaves, joins, actions);
        let snapshot = self.session.state().snapshot();
        let hash = format!("{:016x}", snapshot.canonical_hash());
        let events: Vec<Event> = outcome
            .events
            .iter()
            .filter(|e| !matches!(e, Event::Moved { .. }))
            .cloned()
            .collect();

        self.contexts.retain(|id, _| snapshot.player(id).is_some());
        let (w, h) = self.frame_size;
        let mut work: Vec<(&PlayerState, Option<ObservationContext>)> = snapshot
            .players()
            .map(|p| {
                let ctx = (self.mode == RenderMode::Frames).then(|| {
                    self.contexts
                        .remove(&p.id)
                        .unwrap_or_else(|| ObservationContext::new(DEFAULT_CONTEXT_FRAMES, w, h))
                });
                (p, ctx)
            })
            .collect();

        let view = self.view;
        let lines: Vec<String> = work
            .par_iter_mut()
            .map(|(p, ctx)| {
                let mut update = TickUpdate {
                    tick: snapshot.tick(),
                    snapshot_hash: hash.clone(),
                    pose: WirePose {
                        x: p.pose.x,
                        y: p.pose.y,
                        theta: p.pose.theta(),
                    },
                    status: WireStatus::Active,
                    respawn_tick: None,
                    disparity: FixedDisparity::default(),
                    sprites: Vec::new(),
                    events: events.clone(),
                    frame: None,
                };
                match p.status {
                    PlayerStatus::Dead { respawn_tick } => {
                        update.status = WireStatus::Dead;
                        update.respawn_tick = Some(respawn_tick);
                    }
                    PlayerStatus::Active => {
                        let readout = viewpoint_readout(&snapshot, &p.id, &view).expect("active player has a readout");
                        if let Some(ctx) = ctx {
                            let frame = RaycastBackend
                                .observe(ctx, &readout, &Default::default(), w, h)
                                .expect("frame size is nonzero");
                            update.frame = Some(BASE64.encode(frame.to_ppm()));
                            ctx.push(frame).expect("context frames share one size");
                        }
                        update.disparity = FixedDisparity(readout.depth.disparity);
                        update.sprites = readout.sprites;
                    }
                }
                encode(&ServerMessage::Tick(update))
            })
            .collect();

        let mut updates = Vec::with_capacity(lines.len());
        for ((p, ctx), line) in work.into_iter().zip(lines) {
            if let Some(ctx) = ctx {
                self.contexts.insert(p.id.clone(), ctx);
            }
            updates.push((p.id.clone(), line));
        }
        TickOutput {
            outcome,
            snapshot,
            hash,
            updates,
        }
    }
}
