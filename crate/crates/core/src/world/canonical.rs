//! Canonical text form and digest of world state.
//!
//! The text form is JSON with lexicographically sorted keys and every float
//! written as the shortest decimal carrying at most nine significant digits
//! (see [`fmt_sig9`]). It is used for checkpoints and golden files. The digest
//! is computed separately over poses quantized to 1e-6 so that harmless
//! round-trips through the text form never change it.

use sha2::{Digest, Sha256};

use super::{PlayerStatus, WorldMap, WorldState, MAP_VERSION};

/// Formats `x` in plain decimal notation with at most nine significant
/// digits, trailing zeros removed. Non-finite values are rejected upstream.
pub fn fmt_sig9(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite value {x} in canonical output");
    if x == 0.0 || !x.is_finite() {
        return "0".to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let (int_part, frac_part) = if exp >= 0 {
        let split = exp as usize + 1;
        if split >= digits.len() {
            (format!("{digits}{}", "0".repeat(split - digits.len())), String::new())
        } else {
            (digits[..split].to_string(), digits[split..].to_string())
        }
    } else {
        ("0".to_string(), format!("{}{digits}", "0".repeat((-exp - 1) as usize)))
    };
    let frac = frac_part.trim_end_matches('0');
    let mut out = String::with_capacity(int_part.len() + frac.len() + 2);
    if negative {
        out.push('-');
    }
    out.push_str(&int_part);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

pub(crate) fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

/// Canonical single-line text of a map (sorted keys).
pub fn canonical_map_text(map: &WorldMap) -> String {
    let vertices: Vec<String> = map
        .vertices()
        .iter()
        .map(|v| format!("[{},{}]", fmt_sig9(v.x), fmt_sig9(v.y)))
        .collect();
    let edges: Vec<String> = map.edges().iter().map(|(u, w)| format!("[{u},{w}]")).collect();
    let spawns: Vec<String> = map
        .spawns()
        .iter()
        .map(|s| {
            format!(
                "{{\"theta\":{},\"x\":{},\"y\":{}}}",
                fmt_sig9(s.theta),
                fmt_sig9(s.x),
                fmt_sig9(s.y)
            )
        })
        .collect();
    format!(
        "{{\"edges\":[{}],\"name\":{},\"spawns\":[{}],\"version\":{},\"vertices\":[{}]}}",
        edges.join(","),
        json_str(map.name()),
        spawns.join(","),
        json_str(MAP_VERSION),
        vertices.join(",")
    )
}

pub fn canonical_text(state: &WorldState) -> String {
    let players: Vec<String> = state
        .players()
        .map(|p| {
            let status = match p.status {
                PlayerStatus::Active => "{\"state\":\"active\"}".to_string(),
                PlayerStatus::Dead { respawn_tick } => {
                    format!("{{\"respawn_tick\":{respawn_tick},\"state\":\"dead\"}}")
                }
            };
            format!(
                "{}:{{\"deaths\":{},\"kills\":{},\"pose\":{{\"theta\":{},\"x\":{},\"y\":{}}},\"status\":{}}}",
                json_str(p.id.as_str()),
                p.deaths,
                p.kills,
                fmt_sig9(p.pose.theta()),
                fmt_sig9(p.pose.x),
                fmt_sig9(p.pose.y),
                status
            )
        })
        .collect();
    let last_used: Vec<String> = state
        .spawn_last_used()
        .iter()
        .map(|u| u.map_or_else(|| "null".to_string(), |v| v.to_string()))
        .collect();
    format!(
        "{{\"collision_radius\":{},\"map\":{},\"players\":{{{}}},\"rng_state\":\"{:016x}\",\"spawn_last_used\":[{}],\"spawn_uses\":{},\"tick\":{}}}",
        fmt_sig9(state.collision_radius()),
        canonical_map_text(state.map()),
        players.join(","),
        state.rng().state(),
        last_used.join(","),
        state.spawn_uses(),
        state.tick()
    )
}

fn quantize(v: f64) -> i64 {
    libm::round(v * 1e6) as i64
}

/// 64-bit digest over tick, players (poses quantized to 1e-6), RNG state and
/// spawn rotation.
pub fn canonical_hash(state: &WorldState) -> u64 {
    let mut h = Sha256::new();
    h.update(b"worldmem-state/1");
    h.update(state.tick().to_be_bytes());
    h.update((state.player_count() as u64).to_be_bytes());
    for p in state.players() {
        let id = p.id.as_str().as_bytes();
        h.update((id.len() as u64).to_be_bytes());
        h.update(id);
        h.update(quantize(p.pose.x).to_be_bytes());
        h.update(quantize(p.pose.y).to_be_bytes());
        h.update(quantize(p.pose.theta()).to_be_bytes());
        match p.status {
            PlayerStatus::Active => h.update([0u8]),
            PlayerStatus::Dead { respawn_tick } => {
                h.update([1u8]);
                h.update(respawn_tick.to_be_bytes());
            }
        }
        h.update(p.kills.to_be_bytes());
        h.update(p.deaths.to_be_bytes());
    }
    h.update(state.rng().state().to_be_bytes());
    h.update(state.spawn_uses().to_be_bytes());
    for u in state.spawn_last_used() {
        h.update(u.map_or(u64::MAX, |v| v).to_be_bytes());
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(first)
}

pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}
