//! Predefined maps shipped with the library.

use thiserror::Error;

use crate::document::LevelDocument;
use crate::level::LevelError;

const MAPS: [(&str, &str); 3] = [
    ("two_platform", include_str!("../assets/maps/two_platform.txt")),
    ("arena", include_str!("../assets/maps/arena.txt")),
    ("mirror_corridors", include_str!("../assets/maps/mirror_corridors.txt")),
];

#[derive(Debug, Error)]
pub enum MapError {
    #[error("unknown predefined map {0:?}")]
    UnknownPredefinedMap(String),
    #[error("predefined map {name:?} is malformed: {source}")]
    Malformed { name: String, source: LevelError },
}

pub fn predefined_names() -> impl Iterator<Item = &'static str> {
    MAPS.iter().map(|(name, _)| *name)
}

/// The file text exactly as shipped.
pub fn predefined_source(name: &str) -> Result<&'static str, MapError> {
    MAPS.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| MapError::UnknownPredefinedMap(name.to_string()))
}

pub fn load_predefined(name: &str) -> Result<LevelDocument, MapError> {
    LevelDocument::parse(predefined_source(name)?).map_err(|source| MapError::Malformed {
        name: name.to_string(),
        source,
    })
}
