//! Action scripts: one line per (tick, player), whitespace-separated fields
//! `tick player move strafe turn attack`. Blank lines and `#` comments are
//! ignored; `attack` is `0`/`1` or `false`/`true`.

use std::collections::BTreeMap;

use thiserror::Error;
use worldmem_core::{Action, ActionSet, PlayerId};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Actions keyed by tick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionScript {
    pub ticks: BTreeMap<u64, ActionSet>,
}

impl ActionScript {
    /// Ticks the script spans: one past its last tick, or 0 when empty.
    pub fn len(&self) -> u64 {
        self.ticks.keys().next_back().map_or(0, |t| t + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn actions_at(&self, tick: u64) -> ActionSet {
        self.ticks.get(&tick).cloned().unwrap_or_default()
    }

    pub fn players(&self) -> impl Iterator<Item = &PlayerId> {
        self.ticks.values().flat_map(|a| a.keys())
    }
}

pub fn parse_script(text: &str) -> Result<ActionScript, ScriptError> {
    let mut script = ActionScript::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ScriptError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [tick, player, forward, strafe, turn, attack] = fields[..] else {
            return Err(err(format!(
                "expected 6 fields (tick player move strafe turn attack), found {}",
                fields.len()
            )));
        };
        let tick: u64 = tick.parse().map_err(|_| err(format!("bad tick {tick:?}")))?;
        let int = |name: &str, v: &str| v.parse::<i64>().map_err(|_| err(format!("bad {name} {v:?}")));
        let attack = match attack {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(err(format!("bad attack {other:?}"))),
        };
        let action =
            Action::new(int("move", forward)?, int("strafe", strafe)?, int("turn", turn)?, attack).map_err(|e| err(e.to_string()))?;
        let id = PlayerId::new(player);
        if script.ticks.entry(tick).or_default().insert(id, action).is_some() {
            return Err(err(format!("duplicate action for {player} at tick {tick}")));
        }
    }
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines_and_comments() {
        let s = parse_script("# header\n0 p1 1 0 0 0\n\n0 p2 0 -1 1 true  # note\n3 p1 0 0 0 1\n").unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.actions_at(0).len(), 2);
        assert_eq!(s.actions_at(1).len(), 0);
        assert_eq!(s.actions_at(3)[&PlayerId::new("p1")], Action::new(0, 0, 0, true).unwrap());
    }

    #[test]
    fn empty_script() {
        let s = parse_script("").unwrap();
        assert!(s.is_empty());
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("0 p1 1 0 0\n", 1),
            ("0 p1 1 0 0 0\nx p1 0 0 0 0\n", 2),
            ("\n\n0 p1 2 0 0 0\n", 3),
            ("0 p1 1 0 0 maybe\n", 1),
            ("0 p1 1 0 0 0\n0 p1 0 0 0 0\n", 2),
        ];
        for (text, line) in cases {
            assert_eq!(parse_script(text).unwrap_err().line, line, "{text:?}");
        }
    }
}
