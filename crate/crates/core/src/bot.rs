//! Deterministic scripted opponents for demos, benchmarks and tests.

use crate::dynamics::{wrap_angle_unchecked, Action, MotionConfig};
use crate::geometry::line_of_sight;
use crate::world::{PlayerId, WorldState};

/// Turns toward the nearest active opponent, closes distance, and fires when
/// the opponent is inside the attack cone and in sight. With no opponent it
/// walks in a slow circle. `tick` adds a strafe wobble so players do not
/// deadlock against walls.
pub fn chase_action(state: &WorldState, id: &PlayerId, cfg: &MotionConfig) -> Action {
    let Some(me) = state.player(id).filter(|p| p.is_active()) else {
        return Action::NOOP;
    };
    let origin = me.pose.position();
    let target = state
        .active_players()
        .filter(|p| p.id != *id)
        .map(|p| (origin.distance(p.pose.position()), p))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    let wobble = match (state.tick() / 15) % 4 {
        0 => 1,
        2 => -1,
        _ => 0,
    };
    let Some((dist, target)) = target else {
        return Action {
            forward: 1,
            strafe: 0,
            turn: 1,
            attack: false,
        };
    };
    let bearing = wrap_angle_unchecked((target.pose.position() - origin).angle() - me.pose.theta());
    let turn = if bearing > cfg.turn_rate * 0.5 {
        1
    } else if bearing < -cfg.turn_rate * 0.5 {
        -1
    } else {
        0
    };
    let in_sight = line_of_sight(state.map(), origin, target.pose.position());
    let aimed = bearing.abs() <= cfg.attack_half_angle && dist <= cfg.attack_range;
    Action {
        forward: if dist > 2.0 { 1 } else { 0 },
        strafe: if in_sight { 0 } else { wobble },
        turn,
        attack: aimed && in_sight,
    }
}
