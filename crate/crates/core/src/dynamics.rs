//! Deterministic dynamics: discrete actions to pose increments, sliding wall
//! collision, hitscan attacks and the per-tick world transition.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_visible, segments_intersect, wall_distance, Vec2};
use crate::world::{PlayerId, Pose, WorldError, WorldMap, WorldState};

pub const DEFAULT_COLLISION_RADIUS: f64 = 0.4;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite angle {0}")]
    NonFinite(f64),
    #[error("action component {field}={value} outside {{-1, 0, 1}}")]
    ActionRange { field: &'static str, value: i64 },
    #[error("invalid motion config: {0}")]
    InvalidConfig(String),
    #[error("action for unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Wraps `theta` into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> Result<f64, DynamicsError> {
    if !theta.is_finite() {
        return Err(DynamicsError::NonFinite(theta));
    }
    Ok(wrap_angle_unchecked(theta))
}

pub(crate) fn wrap_angle_unchecked(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let mut r = theta - TWO_PI * libm::floor((theta + PI) / TWO_PI);
    if r >= PI {
        r -= TWO_PI;
    }
    if r < -PI {
        r += TWO_PI;
    }
    r
}

/// One tick of player input. `turn = +1` increases theta (turns left);
/// `strafe = +1` moves right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction", deny_unknown_fields)]
pub struct Action {
    #[serde(rename = "move")]
    pub forward: i8,
    pub strafe: i8,
    pub turn: i8,
    pub attack: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    #[serde(rename = "move", default)]
    forward: i64,
    #[serde(default)]
    strafe: i64,
    #[serde(default)]
    turn: i64,
    #[serde(default)]
    attack: bool,
}

impl TryFrom<RawAction> for Action {
    type Error = DynamicsError;

    fn try_from(r: RawAction) -> Result<Self, DynamicsError> {
        Action::new(r.forward, r.strafe, r.turn, r.attack)
    }
}

impl Action {
    pub const NOOP: Action = Action {
        forward: 0,
        strafe: 0,
        turn: 0,
        attack: false,
    };

    pub fn new(forward: i64, strafe: i64, turn: i64, attack: bool) -> Result<Self, DynamicsError> {
        let check = |field: &'static str, value: i64| {
            if (-1..=1).contains(&value) {
                Ok(value as i8)
            } else {
                Err(DynamicsError::ActionRange { field, value })
            }
        };
        Ok(Self {
            forward: check("move", forward)?,
            strafe: check("strafe", strafe)?,
            turn: check("turn", turn)?,
            attack,
        })
    }

    pub fn is_noop(&self) -> bool {
        *self == Self::NOOP
    }
}

/// Physics constants, all per tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub move_speed: f64,
    pub strafe_speed: f64,
    pub turn_rate: f64,
    pub collision_radius: f64,
    pub attack_range: f64,
    pub attack_half_angle: f64,
    pub respawn_delay: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            move_speed: 0.35,
            strafe_speed: 0.3,
            turn_rate: PI / 36.0,
            collision_radius: DEFAULT_COLLISION_RADIUS,
            attack_range: 20.0,
            attack_half_angle: PI / 60.0,
            respawn_delay: 60,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self, fov: f64) -> Result<(), DynamicsError> {
        let positive = [
            ("move_speed", self.move_speed),
            ("strafe_speed", self.strafe_speed),
            ("turn_rate", self.turn_rate),
            ("collision_radius", self.collision_radius),
            ("attack_range", self.attack_range),
            ("attack_half_angle", self.attack_half_angle),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.respawn_delay == 0 {
            return Err(DynamicsError::InvalidConfig("respawn_delay must be positive".into()));
        }
        if self.attack_half_angle >= fov / 2.0 {
            return Err(DynamicsError::InvalidConfig(format!(
                "attack_half_angle {} must be below fov/2 = {}",
                self.attack_half_angle,
                fov / 2.0
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoseDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

/// Turn first, then translate along the new facing.
pub fn propose_delta(pose: &Pose, action: &Action, cfg: &MotionConfig) -> PoseDelta {
    let dtheta = f64::from(action.turn) * cfg.turn_rate;
    if action.forward == 0 && action.strafe == 0 {
        return PoseDelta { dx: 0.0, dy: 0.0, dtheta };
    }
    let forward = Vec2::from_angle(wrap_angle_unchecked(pose.theta() + dtheta));
    let right = forward.right();
    let d = forward * (f64::from(action.forward) * cfg.move_speed) + right * (f64::from(action.strafe) * cfg.strafe_speed);
    PoseDelta { dx: d.x, dy: d.y, dtheta }
}

fn position_clear(map: &WorldMap, from: Vec2, to: Vec2, radius: f64) -> bool {
    if wall_distance(map, to, radius + 1e-6) < radius {
        return false;
    }
    let mid = (from + to) * 0.5;
    let reach = from.distance(to) * 0.5 + 1e-6;
    let mut crosses = false;
    map.edge_grid().for_each_near(mid, reach, |idx| {
        if !crosses {
            let (a, b) = map.segment(idx as usize);
            crosses = segments_intersect(from, to, a, b);
        }
    });
    !crosses
}

/// Applies `delta` with axis-decomposed sliding: the full move if clear,
/// otherwise the x component then the y component, each kept only if clear.
pub fn resolve_collision(map: &WorldMap, pose: &Pose, delta: &PoseDelta, cfg: &MotionConfig) -> Pose {
    let r = cfg.collision_radius;
    let from = pose.position();
    let mut out = *pose;
    out.set_theta(pose.theta() + delta.dtheta);
    if delta.dx == 0.0 && delta.dy == 0.0 {
        return out;
    }

    let full = from + Vec2::new(delta.dx, delta.dy);
    let pos = if position_clear(map, from, full, r) {
        full
    } else {
        let mut pos = from;
        if delta.dx != 0.0 {
            let step = pos + Vec2::new(delta.dx, 0.0);
            if position_clear(map, pos, step, r) {
                pos = step;
            }
        }
        if delta.dy != 0.0 {
            let step = pos + Vec2::new(0.0, delta.dy);
            if position_clear(map, pos, step, r) {
                pos = step;
            }
        }
        pos
    };
    out.x = pos.x;
    out.y = pos.y;
    out
}

/// Nearest active opponent inside the attack cone with a clear line of sight;
/// ties go to the smaller id.
pub fn resolve_attack(state: &WorldState, attacker: &PlayerId, cfg: &MotionConfig) -> Result<Option<PlayerId>, DynamicsError> {
    let a = state.player(attacker).ok_or_else(|| WorldError::UnknownPlayer(attacker.clone()))?;
    if !a.is_active() {
        return Err(WorldError::NotActive(attacker.clone()).into());
    }
    let origin = a.pose.position();
    let mut best: Option<(f64, &PlayerId)> = None;
    for p in state.active_players().filter(|p| &p.id != attacker) {
        let target = p.pose.position();
        if !is_visible(state.map(), &a.pose, target, 2.0 * cfg.attack_half_angle, cfg.attack_range) {
            continue;
        }
        let d = origin.distance(target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, &p.id));
        }
    }
    Ok(best.map(|(_, id)| id.clone()))
}

/// A fact produced by a world transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Moved {
        tick: u64,
        player: PlayerId,
        x: f64,
        y: f64,
        theta: f64,
    },
    Killed {
        tick: u64,
        victim: PlayerId,
        killer: PlayerId,
    },
    Respawned {
        tick: u64,
        player: PlayerId,
        spawn: usize,
    },
    Joined {
        tick: u64,
        player: PlayerId,
        spawn: usize,
    },
    Left {
        tick: u64,
        player: PlayerId,
    },
}

pub type ActionSet = BTreeMap<PlayerId, Action>;

/// Advances `state` by one tick in place:
/// respawns, then movement in ascending id order, then attacks in ascending
/// id order with kills applied immediately, then `tick += 1`.
///
/// Fails without mutating if `actions` names a player not in the world.
pub fn advance_in_place(state: &mut WorldState, actions: &ActionSet, cfg: &MotionConfig) -> Result<Vec<Event>, DynamicsError> {
    if let Some(unknown) = actions.keys().find(|id| state.player(id).is_none()) {
        return Err(DynamicsError::UnknownPlayer(unknown.clone()));
    }
    let tick = state.tick();
    let mut events = Vec::new();

    for (player, spawn) in state.process_respawns() {
        events.push(Event::Respawned { tick, player, spawn });
    }

    let movers: Vec<PlayerId> = state.active_players().map(|p| p.id.clone()).collect();
    for id in &movers {
        let action = actions.get(id).copied().unwrap_or_default();
        if action.forward == 0 && action.strafe == 0 && action.turn == 0 {
            continue;
        }
        let pose = state.player(id).expect("mover exists").pose;
        let delta = propose_delta(&pose, &action, cfg);
        let next = resolve_collision(state.map(), &pose, &delta, cfg);
        if next != pose {
            state.player_mut(id).expect("mover exists").pose = next;
            events.push(Event::Moved {
                tick,
                player: id.clone(),
                x: next.x,
                y: next.y,
                theta: next.theta(),
            });
        }
    }

    for id in &movers {
        if !actions.get(id).is_some_and(|a| a.attack) {
            continue;
        }
        // Killed earlier this tick: cannot attack.
        if !state.player(id).is_some_and(|p| p.is_active()) {
            continue;
        }
        if let Some(victim) = resolve_attack(state, id, cfg)? {
            state.kill_player(&victim, id, cfg.respawn_delay)?;
            events.push(Event::Killed {
                tick,
                victim,
                killer: id.clone(),
            });
        }
    }

    state.increment_tick();
    Ok(events)
}

/// Pure form of [`advance_in_place`].
pub fn advance_world(state: &WorldState, actions: &ActionSet, cfg: &MotionConfig) -> Result<(WorldState, Vec<Event>), DynamicsError> {
    let mut next = state.clone();
    let events = advance_in_place(&mut next, actions, cfg)?;
    Ok((next, events))
}

/// Kill/death counters reconstructed from an event log.
pub fn fold_counters<'a>(events: impl IntoIterator<Item = &'a Event>) -> BTreeMap<PlayerId, (u64, u64)> {
    let mut out: BTreeMap<PlayerId, (u64, u64)> = BTreeMap::new();
    for e in events {
        match e {
            Event::Killed { victim, killer, .. } => {
                out.entry(killer.clone()).or_default().0 += 1;
                out.entry(victim.clone()).or_default().1 += 1;
            }
            Event::Joined { player, .. } => {
                out.entry(player.clone()).or_default();
            }
            _ => {}
        }
    }
    out
}
