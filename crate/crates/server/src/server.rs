//! Networking around [`TickEngine`]: a dedicated tick-loop thread is the
//! only writer of the world; connection tasks enqueue actions and drain
//! outbound lines.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{self, BufWriter};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc as tmpsc, oneshot};
use tokio::task::JoinHandle;
use worldmem_core::level::{load_map, LevelError, MapDocument};
use worldmem_core::observation::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use worldmem_core::replay::{Recorder, ReplayError, ReplayHeader};
use worldmem_core::{Action, ActionSet, MotionConfig, PlayerId, Snapshot, ViewConfig, WorldMap};

use crate::engine::{RenderMode, TickEngine};
use crate::protocol::{decode, encode, ClientMessage, ErrorCode, ProtocolError, ServerMessage, MAX_LINE_BYTES};

/// Server settings; also the shape of the JSON configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub tick_rate: f64,
    pub listen: String,
    pub map: Option<PathBuf>,
    pub seed: u64,
    pub motion: MotionConfig,
    pub view: ViewConfig,
    pub max_players: usize,
    /// Fraction of the tick period spent collecting actions.
    pub action_deadline: f64,
    pub render_mode: RenderMode,
    pub frame_width: usize,
    pub frame_height: usize,
    pub record: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_rate: 20.0,
            listen: "127.0.0.1:7777".into(),
            map: None,
            seed: 0,
            motion: MotionConfig::default(),
            view: ViewConfig::default(),
            max_players: 8,
            action_deadline: 0.5,
            render_mode: RenderMode::Readout,
            frame_width: DEFAULT_WIDTH,
            frame_height: DEFAULT_HEIGHT,
            record: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ServerError> {
        let bad = |m: String| Err(ServerError::Config(m));
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return bad(format!("tick_rate must be positive, got {}", self.tick_rate));
        }
        if self.max_players == 0 {
            return bad("max_players must be at least 1".into());
        }
        if !(self.action_deadline > 0.0 && self.action_deadline <= 1.0) {
            return bad(format!("action_deadline must be in (0, 1], got {}", self.action_deadline));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return bad("frame size must be nonzero".into());
        }
        self.view.validate().map_err(|e| ServerError::Config(e.to_string()))?;
        self.motion.validate(self.view.fov).map_err(|e| ServerError::Config(e.to_string()))
    }

    pub fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.tick_rate)
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("map: {0}")]
    Map(#[from] LevelError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("replay log: {0}")]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("tick loop panicked")]
    Panicked,
}

/// Durations of recent ticks, newest last.
#[derive(Clone, Debug, Default)]
pub struct TickStats {
    /// Advance, readouts and serialization of one tick.
    pub cycle: VecDeque<Duration>,
    /// Time between consecutive advances.
    pub interval: VecDeque<Duration>,
}

const STATS_WINDOW: usize = 10_000;

impl TickStats {
    fn push(&mut self, cycle: Duration, interval: Option<Duration>) {
        if self.cycle.len() == STATS_WINDOW {
            self.cycle.pop_front();
        }
        self.cycle.push_back(cycle);
        if let Some(i) = interval {
            if self.interval.len() == STATS_WINDOW {
                self.interval.pop_front();
            }
            self.interval.push_back(i);
        }
    }
}

/// Nearest-rank percentile, `q` in [0, 1].
pub fn percentile(samples: impl IntoIterator<Item = Duration>, q: f64) -> Option<Duration> {
    let mut v: Vec<Duration> = samples.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerSummary {
    pub final_tick: u64,
    pub final_hash: String,
}

struct Shared {
    latest: Mutex<Snapshot>,
    stats: Mutex<TickStats>,
    stop: AtomicBool,
}

enum Outbound {
    Line(String),
    Close,
}

enum Control {
    Join {
        name: String,
        out: tmpsc::UnboundedSender<Outbound>,
        reply: oneshot::Sender<Result<PlayerId, ErrorCode>>,
    },
    Leave(PlayerId),
}

type Mailbox = Arc<Mutex<BTreeMap<PlayerId, Action>>>;

/// A running server. Dropping it without [`ServerHandle::shutdown`] leaves
/// the tick loop running until the process exits.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    tick_loop: Option<thread::JoinHandle<Result<ServerSummary, ServerError>>>,
    acceptor: JoinHandle<()>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Latest post-advance snapshot.
    pub fn snapshot(&self) -> Snapshot {
        self.shared.latest.lock().expect("snapshot lock").clone()
    }

    pub fn stats(&self) -> TickStats {
        self.shared.stats.lock().expect("stats lock").clone()
    }

    /// Stops accepting, ends the tick loop, says bye to every client and
    /// finalizes the replay log.
    pub async fn shutdown(mut self) -> Result<ServerSummary, ServerError> {
        self.acceptor.abort();
        self.shared.stop.store(true, Ordering::SeqCst);
        let handle = self.tick_loop.take().expect("shutdown runs once");
        tokio::task::spawn_blocking(move || handle.join())
            .await
            .map_err(|_| ServerError::Panicked)?
            .map_err(|_| ServerError::Panicked)?
    }
}

/// Loads the configured map, serves until Ctrl-C, then shuts down.
pub async fn run_server(cfg: SessionConfig) -> Result<ServerSummary, ServerError> {
    let path = cfg.map.clone().ok_or_else(|| ServerError::Config("no map path given".into()))?;
    let map = load_map(path)?;
    let handle = start(cfg, map).await?;
    tracing::info!(addr = %handle.addr(), "serving");
    let _ = tokio::signal::ctrl_c().await;
    handle.shutdown().await
}

/// Binds, spawns the tick loop and the acceptor, and returns at once.
pub async fn start(cfg: SessionConfig, map: WorldMap) -> Result<ServerHandle, ServerError> {
    cfg.validate()?;
    let header = ReplayHeader::new(&map, cfg.seed, cfg.motion, cfg.view);
    // Built from the header so the live world and any replay share one map.
    let state = header.initial_state()?;
    let recorder = match &cfg.record {
        Some(path) => Some(Recorder::new(BufWriter::new(File::create(path)?), &header)?),
        None => None,
    };
    let listener = TcpListener::bind(&cfg.listen).await.map_err(|source| ServerError::Bind {
        addr: cfg.listen.clone(),
        source,
    })?;
    let addr = listener.local_addr()?;

    let shared = Arc::new(Shared {
        latest: Mutex::new(state.snapshot()),
        stats: Mutex::new(TickStats::default()),
        stop: AtomicBool::new(false),
    });
    let mailbox: Mailbox = Arc::default();
    let (ctrl_tx, ctrl_rx) = mpsc::channel();
    let engine = TickEngine::new(state, cfg.motion, cfg.view, cfg.render_mode, (cfg.frame_width, cfg.frame_height));
    let tick_loop = {
        let shared = shared.clone();
        let mailbox = mailbox.clone();
        let doc = header.map.clone();
        thread::Builder::new()
            .name("tick-loop".into())
            .spawn(move || tick_loop(cfg, doc, engine, recorder, ctrl_rx, mailbox, shared))?
    };
    let acceptor = tokio::spawn(accept_loop(listener, ctrl_tx, mailbox));
    Ok(ServerHandle {
        addr,
        shared,
        tick_loop: Some(tick_loop),
        acceptor,
    })
}

struct Roster {
    out: BTreeMap<PlayerId, tmpsc::UnboundedSender<Outbound>>,
    pending_joins: Vec<PlayerId>,
    leaves: Vec<PlayerId>,
    next_id: u64,
}

#[allow(clippy::too_many_arguments)]
fn tick_loop(
    cfg: SessionConfig,
    map_doc: MapDocument,
    mut engine: TickEngine,
    mut recorder: Option<Recorder<BufWriter<File>>>,
    ctrl: mpsc::Receiver<Control>,
    mailbox: Mailbox,
    shared: Arc<Shared>,
) -> Result<ServerSummary, ServerError> {
    let period = cfg.tick_period();
    let collect = period.mul_f64(cfg.action_deadline);
    let mut roster = Roster {
        out: BTreeMap::new(),
        pending_joins: Vec::new(),
        leaves: Vec::new(),
        next_id: 0,
    };
    let mut period_start = Instant::now();
    let mut last_advance: Option<Instant> = None;

    loop {
        let deadline = period_start + collect;
        loop {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            match ctrl.recv_timeout(deadline - now) {
                Ok(msg) => handle_control(msg, &mut roster, &engine, &cfg, &map_doc, &mailbox),
                Err(RecvTimeoutError::Timeout) => break,
                Err(RecvTimeoutError::Disconnected) => {
                    thread::sleep(deadline.saturating_duration_since(Instant::now()));
                    break;
                }
            }
        }
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }

        let actions: ActionSet = std::mem::take(&mut *mailbox.lock().expect("mailbox lock"))
            .into_iter()
            .filter(|(id, _)| engine.state().player(id).is_some())
            .collect();
        let leaves = std::mem::take(&mut roster.leaves);
        let joins = std::mem::take(&mut roster.pending_joins);
        let started = Instant::now();
        let out = engine.run_tick(&leaves, &joins, &actions);
        // Published before broadcasting so a client never sees a tick the
        // handle cannot.
        *shared.latest.lock().expect("snapshot lock") = out.snapshot;
        for (id, line) in out.updates {
            if let Some(tx) = roster.out.get(&id) {
                let _ = tx.send(Outbound::Line(line));
            }
        }
        let cycle = started.elapsed();
        roster.pending_joins = out.outcome.deferred;

        if let Some(rec) = recorder.as_mut() {
            if let Err(e) = rec.write_tick(&out.outcome.record) {
                tracing::error!("recording stopped: {e}");
                recorder = None;
            }
        }
        shared
            .stats
            .lock()
            .expect("stats lock")
            .push(cycle, last_advance.map(|t| started - t));
        last_advance = Some(started);

        period_start += period;
        let now = Instant::now();
        if now > period_start + period {
            // Overran by more than a period: resynchronize instead of bursting.
            period_start = now;
        }
    }

    for tx in roster.out.values() {
        let _ = tx.send(Outbound::Line(encode(&ServerMessage::Bye)));
        let _ = tx.send(Outbound::Close);
    }
    let state = engine.state();
    if let Some(rec) = recorder {
        rec.finish(state)?;
    }
    Ok(ServerSummary {
        final_tick: state.tick(),
        final_hash: format!("{:016x}", state.canonical_hash()),
    })
}

fn handle_control(msg: Control, roster: &mut Roster, engine: &TickEngine, cfg: &SessionConfig, map_doc: &MapDocument, mailbox: &Mailbox) {
    match msg {
        Control::Join { name, out, reply } => {
            if roster.out.len() >= cfg.max_players {
                let _ = reply.send(Err(ErrorCode::Full));
                return;
            }
            roster.next_id += 1;
            let id = PlayerId::new(format!("p{}", roster.next_id));
            let joined = ServerMessage::Joined {
                player_id: id.clone(),
                tick_rate: cfg.tick_rate,
                map: map_doc.clone(),
                motion: *engine.motion(),
                tick: engine.state().tick(),
            };
            let _ = out.send(Outbound::Line(encode(&joined)));
            tracing::info!(player = %id, name, "joined");
            roster.out.insert(id.clone(), out);
            roster.pending_joins.push(id.clone());
            let _ = reply.send(Ok(id));
        }
        Control::Leave(id) => {
            if roster.out.remove(&id).is_none() {
                return;
            }
            mailbox.lock().expect("mailbox lock").remove(&id);
            if let Some(i) = roster.pending_joins.iter().position(|p| *p == id) {
                roster.pending_joins.remove(i);
            } else {
                roster.leaves.push(id.clone());
            }
            tracing::info!(player = %id, "left");
        }
    }
}

async fn accept_loop(listener: TcpListener, ctrl: mpsc::Sender<Control>, mailbox: Mailbox) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let _ = stream.set_nodelay(true);
                tracing::debug!(%peer, "connection");
                tokio::spawn(connection(stream, ctrl.clone(), mailbox.clone()));
            }
            Err(e) => tracing::warn!("accept failed: {e}"),
        }
    }
}

async fn write_loop(mut wr: OwnedWriteHalf, mut rx: tmpsc::UnboundedReceiver<Outbound>) {
    while let Some(msg) = rx.recv().await {
        match msg {
            Outbound::Line(mut line) => {
                line.push('\n');
                if wr.write_all(line.as_bytes()).await.is_err() {
                    return;
                }
            }
            Outbound::Close => break,
        }
    }
    let _ = wr.shutdown().await;
}

/// Next non-blank line; `Ok(None)` at end of stream.
async fn read_line(r: &mut BufReader<OwnedReadHalf>) -> Result<Option<String>, ProtocolError> {
    loop {
        let mut buf = Vec::new();
        let n = (&mut *r)
            .take(MAX_LINE_BYTES as u64 + 1)
            .read_until(b'\n', &mut buf)
            .await
            .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        if n == 0 {
            return Ok(None);
        }
        if buf.last() != Some(&b'\n') && n > MAX_LINE_BYTES {
            return Err(ProtocolError::Malformed(format!("line longer than {MAX_LINE_BYTES} bytes")));
        }
        let text = String::from_utf8(buf).map_err(|_| ProtocolError::Malformed("line is not UTF-8".into()))?;
        let text = text.trim_end_matches(['\n', '\r']);
        if !text.trim().is_empty() {
            return Ok(Some(text.to_string()));
        }
    }
}

async fn connection(stream: TcpStream, ctrl: mpsc::Sender<Control>, mailbox: Mailbox) {
    let (rd, wr) = stream.into_split();
    let (out_tx, out_rx) = tmpsc::unbounded_channel();
    let writer = tokio::spawn(write_loop(wr, out_rx));
    let mut reader = BufReader::new(rd);
    let fail = |code: ErrorCode, detail: String| {
        let _ = out_tx.send(Outbound::Line(encode(&ServerMessage::error(code, detail))));
        let _ = out_tx.send(Outbound::Close);
    };

    let name = match read_line(&mut reader)
        .await
        .and_then(|l| l.map(|l| decode::<ClientMessage>(&l)).transpose())
    {
        Ok(Some(ClientMessage::Join { name })) => name,
        Ok(Some(_)) => {
            fail(ErrorCode::Protocol, "first message must be join".into());
            drop(out_tx);
            let _ = writer.await;
            return;
        }
        Ok(None) => return,
        Err(e) => {
            fail(e.code(), e.to_string());
            drop(out_tx);
            let _ = writer.await;
            return;
        }
    };

    let (reply_tx, reply_rx) = oneshot::channel();
    let join = Control::Join {
        name,
        out: out_tx.clone(),
        reply: reply_tx,
    };
    if ctrl.send(join).is_err() {
        return;
    }
    let id = match reply_rx.await {
        Ok(Ok(id)) => id,
        Ok(Err(code)) => {
            fail(code, "server full".into());
            drop(out_tx);
            let _ = writer.await;
            return;
        }
        Err(_) => return,
    };

    loop {
        match read_line(&mut reader)
            .await
            .and_then(|l| l.map(|l| decode::<ClientMessage>(&l)).transpose())
        {
            Ok(None) | Ok(Some(ClientMessage::Bye)) => break,
            Ok(Some(msg @ ClientMessage::Action { .. })) => match msg.to_action() {
                Ok(Some(action)) => {
                    // Latest action before the deadline wins.
                    mailbox.lock().expect("mailbox lock").insert(id.clone(), action);
                }
                Ok(None) => unreachable!("action message"),
                Err(e) => {
                    fail(e.code(), e.to_string());
                    break;
                }
            },
            Ok(Some(ClientMessage::Join { .. })) => {
                fail(ErrorCode::Protocol, "already joined".into());
                break;
            }
            Err(e) => {
                fail(e.code(), e.to_string());
                break;
            }
        }
    }
    let _ = ctrl.send(Control::Leave(id));
    let _ = out_tx.send(Outbound::Close);
    drop(out_tx);
    let _ = writer.await;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SessionConfig::default().validate().is_ok());
        let bad = [
            SessionConfig {
                tick_rate: 0.0,
                ..Default::default()
            },
            SessionConfig {
                max_players: 0,
                ..Default::default()
            },
            SessionConfig {
                action_deadline: 1.5,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(ServerError::Config(_))));
        }
    }

    #[test]
    fn config_document_overrides_motion() {
        let c: SessionConfig = serde_json::from_str(r#"{"tick_rate": 10, "motion": {"move_speed": 0.5}}"#).unwrap();
        assert_eq!(c.tick_rate, 10.0);
        assert_eq!(c.motion.move_speed, 0.5);
        assert_eq!(c.motion.strafe_speed, MotionConfig::default().strafe_speed);
        assert!(serde_json::from_str::<SessionConfig>(r#"{"tickrate": 10}"#).is_err());
    }

    #[test]
    fn nearest_rank_percentiles() {
        let ms = |v: u64| Duration::from_millis(v);
        let s = [5, 1, 4, 2, 3].map(ms);
        assert_eq!(percentile(s, 0.5), Some(ms(3)));
        assert_eq!(percentile(s, 0.99), Some(ms(5)));
        assert_eq!(percentile(s, 0.0), Some(ms(1)));
        assert_eq!(percentile([], 0.5), None);
    }
}
