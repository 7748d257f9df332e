//! Core of the shooter level sketching assistant: the level model and its
//! playability rules, the deathmatch simulator, corpus generation, surrogate
//! gameplay networks and the balance-driven suggestion search.

pub mod classes;
pub mod corpus;
pub mod document;
pub mod level;
pub mod maps;
pub mod metrics;
pub mod seed;
pub mod sim;
pub mod suggest;
pub mod surrogate;
pub mod sweep;

pub use classes::{CharacterClass, ClassKind, ClassPair};
pub use document::LevelDocument;
pub use level::{Coord, Level, PowerupKind, TileKind, BASE1, BASE2};
pub use metrics::{extract_metrics, GameplayMetrics};
pub use sim::{is_valid_match, simulate_match, GameplayTrace};
