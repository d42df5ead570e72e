//! Level pipeline: procedural generation, validation, the map file format and
//! minimap rasterization.

mod file;
mod generate;
mod minimap;
mod validate;

pub use file::{load_map, map_from_text, map_to_text, save_map, MapDocument};
pub use generate::{generate_map, LevelSpec};
pub use minimap::{arrow_offsets, rasterize_minimap, MinimapImage, MINIMAP_BACKGROUND, MINIMAP_PADDING, MINIMAP_WALL};
pub use validate::{validate_map, ValidationReport, Violation, CONNECTIVITY_CELL};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LevelError {
    #[error("invalid level spec: {0}")]
    InvalidSpec(String),
    #[error("spec infeasible")]
    Infeasible,
    #[error("map parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported map version {0:?}")]
    Version(String),
    #[error("invalid map: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
