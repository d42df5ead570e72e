use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_map, LevelError};
use crate::dynamics::DEFAULT_COLLISION_RADIUS;
use crate::geometry::Vec2;
use crate::world::{fmt_sig9, json_str, SpawnPoint, WorldMap, MAP_VERSION};

/// Serde mirror of the map file. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub version: String,
    pub name: String,
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
    pub spawns: Vec<SpawnPoint>,
}

impl MapDocument {
    pub fn from_map(map: &WorldMap) -> Self {
        Self {
            version: MAP_VERSION.to_string(),
            name: map.name().to_string(),
            vertices: map.vertices().iter().map(|v| [v.x, v.y]).collect(),
            edges: map.edges().iter().map(|&(u, w)| [u, w]).collect(),
            spawns: map.spawns().to_vec(),
        }
    }

    /// Parses the text form without checking map invariants.
    pub fn parse(text: &str) -> Result<Self, LevelError> {
        serde_json::from_str(text).map_err(|e| LevelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Converts to a map after checking only the version tag.
    pub fn into_map_unvalidated(self) -> Result<WorldMap, LevelError> {
        if self.version != MAP_VERSION {
            return Err(LevelError::Version(self.version));
        }
        Ok(WorldMap::new(
            self.name,
            self.vertices.into_iter().map(|[x, y]| Vec2::new(x, y)).collect(),
            self.edges.into_iter().map(|[u, w]| (u, w)).collect(),
            self.spawns,
        ))
    }

    /// Converts to a map after checking the version tag and map invariants.
    pub fn into_map(self) -> Result<WorldMap, LevelError> {
        let map = self.into_map_unvalidated()?;
        let report = validate_map(&map, DEFAULT_COLLISION_RADIUS);
        if !report.is_valid() {
            return Err(LevelError::Invalid(report));
        }
        Ok(map)
    }
}

/// Human-editable text form: one vertex, edge or spawn per line, floats with
/// at most nine significant digits.
pub fn map_to_text(map: &WorldMap) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"version\": {},", json_str(MAP_VERSION));
    let _ = writeln!(out, "  \"name\": {},", json_str(map.name()));
    write_list(&mut out, "vertices", map.vertices(), |v| {
        format!("[{}, {}]", fmt_sig9(v.x), fmt_sig9(v.y))
    });
    out.push_str(",\n");
    write_list(&mut out, "edges", map.edges(), |(u, w)| format!("[{u}, {w}]"));
    out.push_str(",\n");
    write_list(&mut out, "spawns", map.spawns(), |s| {
        format!(
            "{{\"x\": {}, \"y\": {}, \"theta\": {}}}",
            fmt_sig9(s.x),
            fmt_sig9(s.y),
            fmt_sig9(s.theta)
        )
    });
    out.push_str("\n}\n");
    out
}

fn write_list<T>(out: &mut String, key: &str, items: &[T], f: impl Fn(&T) -> String) {
    let _ = write!(out, "  \"{key}\": [");
    if items.is_empty() {
        out.push(']');
        return;
    }
    out.push('\n');
    for (i, item) in items.iter().enumerate() {
        let sep = if i + 1 == items.len() { "" } else { "," };
        let _ = writeln!(out, "    {}{sep}", f(item));
    }
    out.push_str("  ]");
}

/// Parses and validates a map document.
pub fn map_from_text(text: &str) -> Result<WorldMap, LevelError> {
    MapDocument::parse(text)?.into_map()
}

pub fn save_map(map: &WorldMap, path: impl AsRef<Path>) -> Result<(), LevelError> {
    std::fs::write(path, map_to_text(map))?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<WorldMap, LevelError> {
    map_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{generate_map, LevelSpec};
    use crate::world::canonical_map_text;

    #[test]
    fn generated_round_trip_is_exact() {
        let map = generate_map(&LevelSpec::with_seed(11)).unwrap();
        let text = map_to_text(&map);
        let back = map_from_text(&text).unwrap();
        assert_eq!(back, map);
        assert_eq!(canonical_map_text(&back), canonical_map_text(&map));
        assert_eq!(map_to_text(&back), text);
    }

    #[test]
    fn out_of_range_edge_is_rejected() {
        let text = r#"{"version":"multigen-map/1","name":"x",
            "vertices":[[0,0],[4,0],[4,4],[0,4]],
            "edges":[[0,1],[1,2],[2,3],[0,999]],
            "spawns":[{"x":2,"y":2,"theta":0}]}"#;
        let err = map_from_text(text).unwrap_err();
        assert!(err.to_string().contains("edge index out of range"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let text = "{\n  \"version\": \"multigen-map/1\",\n  \"name\": \"x\",\n  \"colour\": 3,\n  \"vertices\": [], \"edges\": [], \"spawns\": []\n}";
        match map_from_text(text).unwrap_err() {
            LevelError::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("colour"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = r#"{"version":"multigen-map/9","name":"x","vertices":[],"edges":[],"spawns":[]}"#;
        assert!(matches!(map_from_text(text), Err(LevelError::Version(_))));
    }

    #[test]
    fn deleting_a_wall_still_validates() {
        let map = generate_map(&LevelSpec::with_seed(2)).unwrap();
        let mut doc = MapDocument::from_map(&map);
        doc.edges.remove(0);
        assert!(doc.into_map().is_ok());
    }
}
