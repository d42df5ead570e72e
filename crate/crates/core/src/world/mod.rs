//! The explicit external memory: the static map plus the evolving set of
//! player poses, with the death/respawn lifecycle.
//!
//! All mutation happens through `&mut WorldState` (the single writer); readers
//! take a [`Snapshot`], an immutable shared view that later writes never touch.

mod canonical;
mod map;

pub(crate) use canonical::json_str;
pub use canonical::{canonical_hash, canonical_map_text, canonical_text, fmt_sig9, hash_hex};
pub use map::{Bounds, SpawnPoint, WorldMap};

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{wrap_angle, wrap_angle_unchecked, DEFAULT_COLLISION_RADIUS};
use crate::geometry::{wall_distance, Vec2};
use crate::level::{validate_map, ValidationReport};
use crate::rng::SplitMix64;

/// Version tag of the map document format.
pub const MAP_VERSION: &str = "multigen-map/1";

/// Respawn delay used when a caller has no configuration of its own.
pub const DEFAULT_RESPAWN_DELAY: u64 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid map: {0}")]
    InvalidMap(ValidationReport),
    #[error("player {0} already present")]
    DuplicatePlayer(PlayerId),
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("player {0} is not active")]
    NotActive(PlayerId),
    #[error("spawn blocked")]
    SpawnBlocked,
    #[error("pose ({x}, {y}) violates wall clearance")]
    PlacementBlocked { x: f64, y: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

/// Opaque player identifier. Ordering is byte-wise on the text, which fixes
/// every "ascending id" rule in the engine.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Position and yaw. `theta` is kept in `[-pi, pi)` by every constructor and
/// mutator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Pose {
    /// Panics if `theta` is not finite; see [`Pose::try_new`].
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self::try_new(x, y, theta).expect("pose angle must be finite")
    }

    pub fn try_new(x: f64, y: f64, theta: f64) -> Result<Self, WorldError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(WorldError::NonFinite(format!("pose position ({x}, {y})")));
        }
        let theta = wrap_angle(theta).map_err(|_| WorldError::NonFinite(format!("pose angle {theta}")))?;
        Ok(Self { x, y, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = wrap_angle_unchecked(theta);
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn facing(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }
}

impl From<SpawnPoint> for Pose {
    fn from(s: SpawnPoint) -> Self {
        Pose::new(s.x, s.y, s.theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlayerStatus {
    Active,
    Dead { respawn_tick: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayerState {
    pub id: PlayerId,
    pub pose: Pose,
    pub status: PlayerStatus,
    pub kills: u64,
    pub deaths: u64,
}

impl PlayerState {
    pub fn is_active(&self) -> bool {
        self.status == PlayerStatus::Active
    }
}

/// The shared world memory: map, tick, players and the seeded RNG.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    map: Arc<WorldMap>,
    tick: u64,
    players: BTreeMap<PlayerId, PlayerState>,
    rng: SplitMix64,
    collision_radius: f64,
    spawn_last_used: Vec<Option<u64>>,
    spawn_uses: u64,
}

/// Creates a world with the default collision radius.
pub fn new_world(map: impl Into<Arc<WorldMap>>, seed: u64) -> Result<WorldState, WorldError> {
    WorldState::new(map, seed, DEFAULT_COLLISION_RADIUS)
}

impl WorldState {
    pub fn new(map: impl Into<Arc<WorldMap>>, seed: u64, collision_radius: f64) -> Result<Self, WorldError> {
        let map = map.into();
        let report = validate_map(&map, collision_radius);
        if !report.is_valid() {
            return Err(WorldError::InvalidMap(report));
        }
        let spawns = map.spawns().len();
        Ok(Self {
            map,
            tick: 0,
            players: BTreeMap::new(),
            rng: SplitMix64::new(seed),
            collision_radius,
            spawn_last_used: vec![None; spawns],
            spawn_uses: 0,
        })
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn map_arc(&self) -> &Arc<WorldMap> {
        &self.map
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn collision_radius(&self) -> f64 {
        self.collision_radius
    }

    pub fn rng(&self) -> &SplitMix64 {
        &self.rng
    }

    pub fn spawn_last_used(&self) -> &[Option<u64>] {
        &self.spawn_last_used
    }

    pub fn spawn_uses(&self) -> u64 {
        self.spawn_uses
    }

    /// Players in ascending id order.
    pub fn players(&self) -> impl Iterator<Item = &PlayerState> {
        self.players.values()
    }

    pub fn active_players(&self) -> impl Iterator<Item = &PlayerState> {
        self.players.values().filter(|p| p.is_active())
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerState> {
        self.players.get(id)
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub(crate) fn player_mut(&mut self, id: &PlayerId) -> Option<&mut PlayerState> {
        self.players.get_mut(id)
    }

    pub(crate) fn increment_tick(&mut self) {
        self.tick += 1;
    }

    /// Distance from `p` to the nearest wall within `search` of it.
    pub fn clearance_at(&self, p: Vec2, search: f64) -> f64 {
        wall_distance(&self.map, p, search)
    }

    fn spawn_blocked(&self, spawn: usize, ignore: Option<&PlayerId>) -> bool {
        let sp = self.map.spawns()[spawn].position();
        let limit = 2.0 * self.collision_radius;
        self.active_players()
            .filter(|p| Some(&p.id) != ignore)
            .any(|p| p.pose.position().distance(sp) < limit)
    }

    /// Least-recently-used unblocked spawn; never-used spawns first, ties by index.
    fn pick_spawn(&self, ignore: Option<&PlayerId>) -> Option<usize> {
        (0..self.map.spawns().len())
            .filter(|&i| !self.spawn_blocked(i, ignore))
            .min_by_key(|&i| (self.spawn_last_used[i].map_or(0, |u| u + 1), i))
    }

    fn claim_spawn(&mut self, spawn: usize) -> Pose {
        self.spawn_last_used[spawn] = Some(self.spawn_uses);
        self.spawn_uses += 1;
        Pose::from(self.map.spawns()[spawn])
    }

    /// Adds `id` as an active player at the next spawn point and returns the
    /// spawn index used.
    pub fn add_player(&mut self, id: PlayerId) -> Result<usize, WorldError> {
        if self.players.contains_key(&id) {
            return Err(WorldError::DuplicatePlayer(id));
        }
        let spawn = self.pick_spawn(None).ok_or(WorldError::SpawnBlocked)?;
        let pose = self.claim_spawn(spawn);
        self.players.insert(
            id.clone(),
            PlayerState {
                id,
                pose,
                status: PlayerStatus::Active,
                kills: 0,
                deaths: 0,
            },
        );
        Ok(spawn)
    }

    /// Removes a player entirely (disconnect).
    pub fn remove_player(&mut self, id: &PlayerId) -> Result<PlayerState, WorldError> {
        self.players.remove(id).ok_or_else(|| WorldError::UnknownPlayer(id.clone()))
    }

    /// Marks `victim` dead until `tick + respawn_delay` and credits `killer`.
    /// A self-kill increments both counters on the same player.
    pub fn kill_player(&mut self, victim: &PlayerId, killer: &PlayerId, respawn_delay: u64) -> Result<(), WorldError> {
        if !self.players.contains_key(killer) {
            return Err(WorldError::UnknownPlayer(killer.clone()));
        }
        let respawn_tick = self.tick + respawn_delay.max(1);
        let v = self
            .players
            .get_mut(victim)
            .ok_or_else(|| WorldError::UnknownPlayer(victim.clone()))?;
        if !v.is_active() {
            return Err(WorldError::NotActive(victim.clone()));
        }
        v.status = PlayerStatus::Dead { respawn_tick };
        v.deaths += 1;
        self.players.get_mut(killer).expect("checked above").kills += 1;
        Ok(())
    }

    /// Reactivates every dead player whose respawn tick has come, in ascending
    /// id order. A player whose every spawn is blocked stays dead and is
    /// retried on the next call. Returns `(player, spawn index)` pairs.
    pub fn process_respawns(&mut self) -> Vec<(PlayerId, usize)> {
        let due: Vec<PlayerId> = self
            .players
            .values()
            .filter(|p| matches!(p.status, PlayerStatus::Dead { respawn_tick } if respawn_tick <= self.tick))
            .map(|p| p.id.clone())
            .collect();
        let mut out = Vec::new();
        for id in due {
            let Some(spawn) = self.pick_spawn(Some(&id)) else {
                continue;
            };
            let pose = self.claim_spawn(spawn);
            let p = self.players.get_mut(&id).expect("due player exists");
            p.pose = pose;
            p.status = PlayerStatus::Active;
            out.push((id, spawn));
        }
        out
    }

    /// Direct edit of a player's pose. The new position must keep the
    /// collision clearance; the map and other players are untouched.
    pub fn place_player(&mut self, id: &PlayerId, pose: Pose) -> Result<(), WorldError> {
        let search = self.collision_radius * 2.0 + 1.0;
        if self.clearance_at(pose.position(), search) < self.collision_radius {
            return Err(WorldError::PlacementBlocked { x: pose.x, y: pose.y });
        }
        let p = self.players.get_mut(id).ok_or_else(|| WorldError::UnknownPlayer(id.clone()))?;
        p.pose = pose;
        Ok(())
    }

    /// Frozen view of the current state.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot(Arc::new(self.clone()))
    }

    pub fn canonical_hash(&self) -> u64 {
        canonical_hash(self)
    }

    pub fn canonical_text(&self) -> String {
        canonical_text(self)
    }
}

/// Immutable, cheaply clonable view of a [`WorldState`].
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot(Arc<WorldState>);

impl Deref for Snapshot {
    type Target = WorldState;

    fn deref(&self) -> &WorldState {
        &self.0
    }
}

impl From<WorldState> for Snapshot {
    fn from(s: WorldState) -> Self {
        Snapshot(Arc::new(s))
    }
}
