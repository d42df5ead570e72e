//! Session logs: recording, strict parsing and headless re-execution with
//! divergence detection.
//!
//! A log is JSON lines. The first line is the header (map, seed, motion and
//! view config). Each tick line lists the leaves, joins and non-idle actions
//! applied at that tick, plus the state hash after the advance. A checkpoint
//! line follows every tick that ends on a multiple of
//! [`CHECKPOINT_INTERVAL`]. The trailer carries the final tick and hash.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{advance_in_place, Action, ActionSet, DynamicsError, Event, MotionConfig};
use crate::geometry::ViewConfig;
use crate::level::{LevelError, MapDocument};
use crate::world::{hash_hex, PlayerId, WorldError, WorldMap, WorldState};

pub const REPLAY_FORMAT: &str = "multigen-replay/1";
pub const CHECKPOINT_INTERVAL: u64 = 100;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("tick gap: expected tick {expected}, found {found} (line {line})")]
    Contiguity { expected: u64, found: u64, line: usize },
    #[error("log has no trailer")]
    MissingTrailer,
    #[error("unsupported log format {0:?}")]
    Format(String),
    #[error("header map: {0}")]
    Map(#[from] LevelError),
    #[error("tick {tick}: {source}")]
    Apply { tick: u64, source: DynamicsError },
    #[error("divergence at tick {tick} (checkpoint window {window_start}..={window_end}): expected {expected}, replayed {actual}")]
    Divergence {
        tick: u64,
        window_start: u64,
        window_end: u64,
        expected: String,
        actual: String,
    },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ReplayError {
    /// First post-advance tick whose state disagrees with the log, if this
    /// is a divergence.
    pub fn divergent_tick(&self) -> Option<u64> {
        match self {
            ReplayError::Divergence { tick, .. } => Some(*tick),
            ReplayError::Apply { tick, .. } => Some(*tick),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayHeader {
    pub format: String,
    pub map: MapDocument,
    pub seed: u64,
    pub motion: MotionConfig,
    pub view: ViewConfig,
}

impl ReplayHeader {
    pub fn new(map: &WorldMap, seed: u64, motion: MotionConfig, view: ViewConfig) -> Self {
        Self {
            format: REPLAY_FORMAT.to_string(),
            map: MapDocument::from_map(map),
            seed,
            motion,
            view,
        }
    }

    pub fn initial_state(&self) -> Result<WorldState, ReplayError> {
        let map = self.map.clone().into_map()?;
        Ok(WorldState::new(map, self.seed, self.motion.collision_radius)?)
    }
}

/// Inputs applied at one tick, in application order: leaves, joins, advance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRecord {
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaves: Vec<PlayerId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joins: Vec<PlayerId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub actions: ActionSet,
    /// State hash after the advance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(ReplayHeader),
    Tick(TickRecord),
    Checkpoint { tick: u64, hash: String },
    Trailer { final_tick: u64, final_hash: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayLog {
    pub header: ReplayHeader,
    pub ticks: Vec<TickRecord>,
    /// (tick, hash) pairs, tick being the state tick after the advance.
    pub checkpoints: Vec<(u64, String)>,
    pub final_tick: u64,
    pub final_hash: String,
}

impl ReplayLog {
    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        let mut header = None;
        let mut ticks: Vec<TickRecord> = Vec::new();
        let mut checkpoints = Vec::new();
        let mut trailer = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(raw).map_err(|e| ReplayError::Parse {
                line,
                message: e.to_string(),
            })?;
            let misplaced = |what: &str| ReplayError::Parse {
                line,
                message: format!("unexpected {what}"),
            };
            if trailer.is_some() {
                return Err(misplaced("line after trailer"));
            }
            match parsed {
                Line::Header(h) => {
                    if header.is_some() || line != 1 {
                        return Err(misplaced("header"));
                    }
                    if h.format != REPLAY_FORMAT {
                        return Err(ReplayError::Format(h.format));
                    }
                    header = Some(h);
                }
                _ if header.is_none() => return Err(misplaced("record before header")),
                Line::Tick(t) => {
                    let expected = ticks.last().map_or(0, |p| p.tick + 1);
                    if t.tick != expected {
                        return Err(ReplayError::Contiguity {
                            expected,
                            found: t.tick,
                            line,
                        });
                    }
                    ticks.push(t);
                }
                Line::Checkpoint { tick, hash } => checkpoints.push((tick, hash)),
                Line::Trailer { final_tick, final_hash } => trailer = Some((final_tick, final_hash)),
            }
        }
        let header = header.ok_or(ReplayError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let (final_tick, final_hash) = trailer.ok_or(ReplayError::MissingTrailer)?;
        Ok(Self {
            header,
            ticks,
            checkpoints,
            final_tick,
            final_hash,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        let mut rec = Recorder::new(&mut out, &self.header).expect("in-memory write");
        for t in &self.ticks {
            rec.write_tick(t).expect("in-memory write");
        }
        rec.finish_with(self.final_tick, &self.final_hash).expect("in-memory write");
        String::from_utf8(out).expect("utf-8 log")
    }
}

/// Streams a log to `W`.
pub struct Recorder<W: Write> {
    out: W,
}

impl<W: Write> Recorder<W> {
    pub fn new(mut out: W, header: &ReplayHeader) -> io::Result<Self> {
        write_line(&mut out, &Line::Header(header.clone()))?;
        Ok(Self { out })
    }

    /// Writes a tick line, and a checkpoint when the post-advance tick is a
    /// multiple of [`CHECKPOINT_INTERVAL`].
    pub fn write_tick(&mut self, record: &TickRecord) -> io::Result<()> {
        write_line(&mut self.out, &Line::Tick(record.clone()))?;
        let post = record.tick + 1;
        if post.is_multiple_of(CHECKPOINT_INTERVAL) {
            if let Some(hash) = &record.hash {
                write_line(
                    &mut self.out,
                    &Line::Checkpoint {
                        tick: post,
                        hash: hash.clone(),
                    },
                )?;
            }
        }
        Ok(())
    }

    pub fn finish(self, state: &WorldState) -> io::Result<W> {
        self.finish_with(state.tick(), &hash_hex(state.canonical_hash()))
    }

    fn finish_with(mut self, final_tick: u64, final_hash: &str) -> io::Result<W> {
        write_line(
            &mut self.out,
            &Line::Trailer {
                final_tick,
                final_hash: final_hash.to_string(),
            },
        )?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_line(out: &mut impl Write, line: &Line) -> io::Result<()> {
    let text = serde_json::to_string(line).map_err(io::Error::other)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")
}

/// Outcome of one tick applied through [`Session::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// What to log; joins hold only the players that entered.
    pub record: TickRecord,
    pub events: Vec<Event>,
    /// Joins that found every spawn blocked; retry next tick.
    pub deferred: Vec<PlayerId>,
}

/// The authoritative tick transition shared by the live server and replay.
#[derive(Clone, Debug)]
pub struct Session {
    state: WorldState,
    motion: MotionConfig,
}

impl Session {
    pub fn new(state: WorldState, motion: MotionConfig) -> Self {
        Self { state, motion }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn motion(&self) -> &MotionConfig {
        &self.motion
    }

    pub fn into_state(self) -> WorldState {
        self.state
    }

    /// Removes `leaves`, admits `joins` (deferring blocked ones), then
    /// advances with the actions of players present after both.
    pub fn step(&mut self, leaves: &[PlayerId], joins: &[PlayerId], actions: &ActionSet) -> StepOutcome {
        let tick = self.state.tick();
        let mut events = Vec::new();
        let mut record = TickRecord {
            tick,
            ..Default::default()
        };
        for id in leaves {
            if self.state.remove_player(id).is_ok() {
                events.push(Event::Left { tick, player: id.clone() });
                record.leaves.push(id.clone());
            }
        }
        let mut deferred = Vec::new();
        for id in joins {
            match self.state.add_player(id.clone()) {
                Ok(spawn) => {
                    events.push(Event::Joined {
                        tick,
                        player: id.clone(),
                        spawn,
                    });
                    record.joins.push(id.clone());
                }
                Err(WorldError::SpawnBlocked) => deferred.push(id.clone()),
                Err(_) => {}
            }
        }
        record.actions = actions
            .iter()
            .filter(|(id, a)| !a.is_noop() && self.state.player(id).is_some())
            .map(|(id, a)| (id.clone(), *a))
            .collect();
        let moved = advance_in_place(&mut self.state, &record.actions, &self.motion).expect("actions filtered to present players");
        events.extend(moved);
        record.hash = Some(hash_hex(self.state.canonical_hash()));
        StepOutcome { record, events, deferred }
    }

    /// Applies a logged tick strictly: every leave and join must succeed.
    pub fn apply(&mut self, record: &TickRecord) -> Result<Vec<Event>, ReplayError> {
        let tick = self.state.tick();
        if record.tick != tick {
            return Err(ReplayError::Contiguity {
                expected: tick,
                found: record.tick,
                line: 0,
            });
        }
        let fail = |e: WorldError| ReplayError::Apply { tick, source: e.into() };
        let mut events = Vec::new();
        for id in &record.leaves {
            self.state.remove_player(id).map_err(fail)?;
            events.push(Event::Left { tick, player: id.clone() });
        }
        for id in &record.joins {
            let spawn = self.state.add_player(id.clone()).map_err(fail)?;
            events.push(Event::Joined {
                tick,
                player: id.clone(),
                spawn,
            });
        }
        let moved =
            advance_in_place(&mut self.state, &record.actions, &self.motion).map_err(|source| ReplayError::Apply { tick, source })?;
        events.extend(moved);
        Ok(events)
    }
}

/// Result of a verified replay.
#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub state: WorldState,
    pub events: Vec<Event>,
}

/// Re-runs `log` and checks every checkpoint and the trailer.
pub fn replay_from_log(log: &ReplayLog) -> Result<ReplayOutcome, ReplayError> {
    let mut events = Vec::new();
    let state = replay_visit(log, |_, _, ev| events.extend_from_slice(ev))?;
    Ok(ReplayOutcome { state, events })
}

/// Like [`replay_from_log`], calling `visit` with every post-advance state.
pub fn replay_visit(log: &ReplayLog, mut visit: impl FnMut(&WorldState, &TickRecord, &[Event])) -> Result<WorldState, ReplayError> {
    let mut session = Session::new(log.header.initial_state()?, log.header.motion);
    let initial = hash_hex(session.state().canonical_hash());
    let mut computed: Vec<String> = Vec::with_capacity(log.ticks.len());
    let checkpoints: BTreeMap<u64, &str> = log.checkpoints.iter().map(|(t, h)| (*t, h.as_str())).collect();
    let mut last_good = 0u64;

    for record in &log.ticks {
        let events = session.apply(record)?;
        let hash = hash_hex(session.state().canonical_hash());
        computed.push(hash.clone());
        let tick = session.state().tick();
        if let Some(expected) = checkpoints.get(&tick) {
            if *expected != hash {
                return Err(locate(log, &computed, last_good, tick, expected, &hash));
            }
            last_good = tick;
        }
        visit(session.state(), record, &events);
    }

    let state = session.into_state();
    let final_hash = if log.ticks.is_empty() {
        initial
    } else {
        computed.last().cloned().unwrap_or_default()
    };
    if state.tick() != log.final_tick || final_hash != log.final_hash {
        return Err(locate(
            log,
            &computed,
            last_good,
            state.tick().max(log.final_tick),
            &log.final_hash,
            &final_hash,
        ));
    }
    Ok(state)
}

/// Bisects the per-tick hashes between the last matching checkpoint and the
/// first mismatch to find the earliest divergent tick.
fn locate(log: &ReplayLog, computed: &[String], good: u64, bad: u64, expected: &str, actual: &str) -> ReplayError {
    let recorded = |t: u64| -> Option<&str> {
        // Post-advance tick t is produced by record t - 1.
        log.ticks.get((t as usize).checked_sub(1)?).and_then(|r| r.hash.as_deref())
    };
    let matches = |t: u64| match (recorded(t), computed.get((t as usize).wrapping_sub(1))) {
        (Some(r), Some(c)) => r == c,
        _ => false,
    };
    let (mut lo, mut hi) = (good, bad.max(good + 1));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if matches(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ReplayError::Divergence {
        tick: hi,
        window_start: good + 1,
        window_end: bad,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}

/// Headless recording helper: runs a session and keeps the log in memory.
pub struct HeadlessRun {
    session: Session,
    header: ReplayHeader,
    ticks: Vec<TickRecord>,
    events: Vec<Event>,
}

impl HeadlessRun {
    pub fn new(map: impl Into<Arc<WorldMap>>, seed: u64, motion: MotionConfig, view: ViewConfig) -> Result<Self, ReplayError> {
        let map = map.into();
        let header = ReplayHeader::new(&map, seed, motion, view);
        let state = WorldState::new(map, seed, motion.collision_radius)?;
        Ok(Self {
            session: Session::new(state, motion),
            header,
            ticks: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn state(&self) -> &WorldState {
        self.session.state()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn step(&mut self, leaves: &[PlayerId], joins: &[PlayerId], actions: &ActionSet) -> StepOutcome {
        let out = self.session.step(leaves, joins, actions);
        self.ticks.push(out.record.clone());
        self.events.extend(out.events.iter().cloned());
        out
    }

    pub fn into_log(self) -> ReplayLog {
        let state = self.session.state();
        let checkpoints = self
            .ticks
            .iter()
            .filter(|t| (t.tick + 1) % CHECKPOINT_INTERVAL == 0)
            .filter_map(|t| t.hash.clone().map(|h| (t.tick + 1, h)))
            .collect();
        ReplayLog {
            header: self.header,
            final_tick: state.tick(),
            final_hash: hash_hex(state.canonical_hash()),
            ticks: self.ticks,
            checkpoints,
        }
    }
}

/// Builds an action set from `(id, action)` pairs.
pub fn actions<'a>(pairs: impl IntoIterator<Item = (&'a str, Action)>) -> ActionSet {
    pairs.into_iter().map(|(id, a)| (PlayerId::new(id), a)).collect()
}
