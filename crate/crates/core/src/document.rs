//! Text level file: architecture, powerups and the class matchup.
//!
//! ```text
//! version: 1
//! class1: Heavy
//! class2: Scout
//! grid:
//! GGGGGGGGGGGGGGGGGGGG      <- 20 rows of G/F/W/S, row 0 first
//! ...
//! powerups:
//! ....................      <- 20 rows of ./H/A/D
//! ...
//! ```
//!
//! Row 0 is the top row and column 0 the leftmost; base 1 sits at row 0, column 0.

use serde::{Deserialize, Serialize};

use crate::classes::{ClassKind, ClassPair};
use crate::level::{Level, LevelError, Result, SIZE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDocument {
    pub level: Level,
    pub classes: ClassPair,
}

impl LevelDocument {
    pub fn new(level: Level, classes: ClassPair) -> Self {
        Self { level, classes }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(1024);
        out.push_str(&format!("version: {FORMAT_VERSION}\n"));
        out.push_str(&format!("class1: {}\n", self.classes.class1));
        out.push_str(&format!("class2: {}\n", self.classes.class2));
        out.push_str("grid:\n");
        for row in self.level.grid_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out.push_str("powerups:\n");
        for row in self.level.powerup_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        let mut cursor = 0usize;

        let version = field(&lines, &mut cursor, "version")?;
        if version != FORMAT_VERSION.to_string() {
            return Err(err(cursor, 10, format!("unsupported version {version:?}")));
        }
        let class1 = class_field(&lines, &mut cursor, "class1")?;
        let class2 = class_field(&lines, &mut cursor, "class2")?;

        section(&lines, &mut cursor, "grid:")?;
        let grid_first = cursor + 1;
        let grid = take_rows(&lines, &mut cursor, "grid")?;
        section(&lines, &mut cursor, "powerups:")?;
        let powerup_first = cursor + 1;
        let powerups = take_rows(&lines, &mut cursor, "powerups")?;

        if let Some((i, extra)) = lines
            .iter()
            .enumerate()
            .skip(cursor)
            .find(|(_, l)| !l.trim().is_empty())
        {
            return Err(err(i + 1, 1, format!("unexpected trailing content {extra:?}")));
        }

        let level = Level::from_rows(&grid, &powerups, grid_first, powerup_first)?;
        Ok(Self {
            level,
            classes: ClassPair::new(class1, class2),
        })
    }
}

fn err(line: usize, column: usize, message: String) -> LevelError {
    LevelError::Parse { line, column, message }
}

fn next_line<'a>(lines: &[&'a str], cursor: &mut usize, expect: &str) -> Result<&'a str> {
    let line = lines
        .get(*cursor)
        .ok_or_else(|| err(*cursor + 1, 1, format!("unexpected end of document, expected {expect}")))?;
    *cursor += 1;
    Ok(line)
}

fn field<'a>(lines: &[&'a str], cursor: &mut usize, key: &str) -> Result<&'a str> {
    let line = next_line(lines, cursor, key)?;
    let prefix = format!("{key}:");
    line.strip_prefix(&prefix)
        .map(str::trim)
        .ok_or_else(|| err(*cursor, 1, format!("expected `{key}: ...`, found {line:?}")))
}

fn class_field(lines: &[&str], cursor: &mut usize, key: &str) -> Result<ClassKind> {
    let value = field(lines, cursor, key)?;
    value
        .parse()
        .map_err(|e: crate::classes::ClassError| err(*cursor, key.len() + 3, e.to_string()))
}

fn section(lines: &[&str], cursor: &mut usize, header: &str) -> Result<()> {
    let line = next_line(lines, cursor, header)?;
    if line.trim_end() != header {
        return Err(err(*cursor, 1, format!("expected {header:?}, found {line:?}")));
    }
    Ok(())
}

fn take_rows<'a>(lines: &[&'a str], cursor: &mut usize, what: &str) -> Result<Vec<&'a str>> {
    let mut rows = Vec::with_capacity(SIZE);
    for _ in 0..SIZE {
        rows.push(next_line(lines, cursor, &format!("{what} row"))?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{Coord, PowerupKind, TileKind};

    #[test]
    fn empty_level_round_trips() {
        let doc = LevelDocument::new(Level::new(), ClassPair::default());
        let text = doc.serialize();
        assert_eq!(LevelDocument::parse(&text).unwrap(), doc);
        assert_eq!(text.lines().count(), 4 + SIZE + 1 + SIZE);
    }

    #[test]
    fn long_row_is_rejected_with_position() {
        let doc = LevelDocument::new(Level::new(), ClassPair::default());
        let text = doc
            .serialize()
            .replacen("GGGGGGGGGGGGGGGGGGGG\n", "GGGGGGGGGGGGGGGGGGGGG\n", 1);
        match LevelDocument::parse(&text) {
            Err(LevelError::Parse { line, column, .. }) => assert_eq!((line, column), (5, 21)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_symbols_and_sections() {
        let base = LevelDocument::new(Level::new(), ClassPair::default()).serialize();
        let bad_tile = base.replacen("GGGGGGGGGGGGGGGGGGGG\nGGG", "GGGGGGGGGGGGGGGGGGGG\nGGX", 1);
        assert!(matches!(
            LevelDocument::parse(&bad_tile),
            Err(LevelError::Parse { line: 6, column: 3, .. })
        ));
        let bad_class = base.replace("class2: Scout", "class2: Pyro");
        assert!(matches!(
            LevelDocument::parse(&bad_class),
            Err(LevelError::Parse { line: 3, .. })
        ));
        let truncated: String = base.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            LevelDocument::parse(&truncated),
            Err(LevelError::Parse { .. })
        ));
        let walled_base = base.replacen("grid:\nG", "grid:\nW", 1);
        assert!(LevelDocument::parse(&walled_base).is_err());
    }

    #[test]
    fn powerup_on_wall_is_rejected() {
        let mut level = Level::new();
        level.set_tile(Coord::new(1, 1), TileKind::Wall).unwrap();
        let text = LevelDocument::new(level, ClassPair::default()).serialize();
        let lines: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 4 + SIZE + 1 + 1 {
                    ".H..................".to_string()
                } else {
                    l.to_string()
                }
            })
            .collect();
        assert!(matches!(
            LevelDocument::parse(&lines.join("\n")),
            Err(LevelError::Parse { column: 2, .. })
        ));
    }

    #[test]
    fn powerups_survive() {
        let mut level = Level::new();
        level.set_powerup(Coord::new(7, 3), PowerupKind::Damage).unwrap();
        level.set_tile(Coord::new(2, 2), TileKind::FirstFloor).unwrap();
        let doc = LevelDocument::new(level, ClassPair::new(ClassKind::Sniper, ClassKind::DemolitionMan));
        assert_eq!(LevelDocument::parse(&doc.serialize()).unwrap(), doc);
    }
}
