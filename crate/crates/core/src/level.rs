//! Tile-grid level model: editing rules, the movement graph, playability
//! checks and the map-tab metrics.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of every level.
pub const SIZE: usize = 20;
/// Number of tiles in a level.
pub const TILES: usize = SIZE * SIZE;
/// Side length of a heatmap / powerup cell, in tiles.
pub const CELL: usize = 5;
/// Cells per side (4×4 partition).
pub const CELLS_PER_SIDE: usize = SIZE / CELL;
/// Number of cells in the partition.
pub const CELLS: usize = CELLS_PER_SIDE * CELLS_PER_SIDE;

/// Marker for "no path" in distance tables.
pub const UNREACHABLE: u16 = u16::MAX;

pub const BASE1: Coord = Coord { row: 0, col: 0 };
pub const BASE2: Coord = Coord {
    row: SIZE - 1,
    col: SIZE - 1,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LevelError {
    #[error("coordinate ({row}, {col}) is outside the {SIZE}x{SIZE} grid")]
    OutOfBounds { row: usize, col: usize },
    #[error("base tile {0} cannot hold walls or stairs")]
    BaseTileProtected(Coord),
    #[error("stairs cannot be painted over an area")]
    StairsAreaPaintForbidden,
    #[error("powerups can only be placed on ground or first-floor tiles, {0} is not")]
    InvalidPowerupTile(Coord),
    #[error("path endpoint {0} is not a passable tile")]
    InvalidEndpoint(Coord),
    #[error("the level has no tile of the requested type")]
    NoSuchTarget,
    #[error("no tile of the requested type is reachable from {0}")]
    TargetUnreachable(Coord),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, LevelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn from_index(index: usize) -> Self {
        Self {
            row: index / SIZE,
            col: index % SIZE,
        }
    }

    pub fn index(self) -> usize {
        self.row * SIZE + self.col
    }

    pub fn in_bounds(self) -> bool {
        self.row < SIZE && self.col < SIZE
    }

    /// Index of the 5×5 cell containing this tile, row-major over the 4×4 partition.
    pub fn cell(self) -> usize {
        CELLS_PER_SIDE * (self.row / CELL) + self.col / CELL
    }

    pub fn is_base(self) -> bool {
        self == BASE1 || self == BASE2
    }

    /// 4-neighbours in a fixed order: up, down, left, right.
    pub fn neighbors4(self) -> impl Iterator<Item = Coord> {
        let Coord { row, col } = self;
        [
            (row.wrapping_sub(1), col),
            (row + 1, col),
            (row, col.wrapping_sub(1)),
            (row, col + 1),
        ]
        .into_iter()
        .map(|(row, col)| Coord { row, col })
        .filter(|c| c.in_bounds())
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Tiles of a cell, row-major.
pub fn cell_tiles(cell: usize) -> impl Iterator<Item = Coord> {
    let r0 = (cell / CELLS_PER_SIDE) * CELL;
    let c0 = (cell % CELLS_PER_SIDE) * CELL;
    (r0..r0 + CELL).flat_map(move |row| (c0..c0 + CELL).map(move |col| Coord { row, col }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TileKind {
    Ground,
    FirstFloor,
    Wall,
    Stairs,
}

impl TileKind {
    pub const ALL: [TileKind; 4] = [TileKind::Ground, TileKind::FirstFloor, TileKind::Wall, TileKind::Stairs];

    pub fn symbol(self) -> char {
        match self {
            TileKind::Ground => 'G',
            TileKind::FirstFloor => 'F',
            TileKind::Wall => 'W',
            TileKind::Stairs => 'S',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            'G' => TileKind::Ground,
            'F' => TileKind::FirstFloor,
            'W' => TileKind::Wall,
            'S' => TileKind::Stairs,
            _ => return None,
        })
    }

    pub fn is_passable(self) -> bool {
        self != TileKind::Wall
    }

    /// Whether a powerup may sit on this tile.
    pub fn holds_powerup(self) -> bool {
        matches!(self, TileKind::Ground | TileKind::FirstFloor)
    }

    /// Directed edge rule of the movement graph between two 4-adjacent tiles.
    pub fn can_move(from: TileKind, to: TileKind) -> bool {
        use TileKind::*;
        matches!(
            (from, to),
            (Ground, Ground)
                | (FirstFloor, FirstFloor)
                | (Stairs, FirstFloor)
                | (FirstFloor, Stairs)
                | (Stairs, Ground)
                | (Ground, Stairs)
                | (FirstFloor, Ground)
        )
    }
}

impl FromStr for TileKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Ground" => Ok(TileKind::Ground),
            "FirstFloor" => Ok(TileKind::FirstFloor),
            "Wall" => Ok(TileKind::Wall),
            "Stairs" => Ok(TileKind::Stairs),
            other => Err(format!("unknown tile kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowerupKind {
    Health,
    Armor,
    Damage,
}

impl PowerupKind {
    pub const ALL: [PowerupKind; 3] = [PowerupKind::Health, PowerupKind::Armor, PowerupKind::Damage];

    pub fn symbol(self) -> char {
        match self {
            PowerupKind::Health => 'H',
            PowerupKind::Armor => 'A',
            PowerupKind::Damage => 'D',
        }
    }

    pub fn from_symbol(c: char) -> Option<Option<Self>> {
        Some(match c {
            '.' => None,
            'H' => Some(PowerupKind::Health),
            'A' => Some(PowerupKind::Armor),
            'D' => Some(PowerupKind::Damage),
            _ => return None,
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for PowerupKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Health" => Ok(PowerupKind::Health),
            "Armor" => Ok(PowerupKind::Armor),
            "Damage" => Ok(PowerupKind::Damage),
            other => Err(format!("unknown powerup kind {other:?}")),
        }
    }
}

/// A 20×20 level: architecture grid plus powerup overlay. Bases are fixed
/// at [`BASE1`] and [`BASE2`] and are always ground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Level {
    grid: [TileKind; TILES],
    powerups: [Option<PowerupKind>; TILES],
}

impl Default for Level {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Level {{")?;
        for row in 0..SIZE {
            let line: String = (0..SIZE).map(|col| self.glyph(Coord { row, col })).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "}}")
    }
}

fn check_bounds(at: Coord) -> Result<()> {
    if at.in_bounds() {
        Ok(())
    } else {
        Err(LevelError::OutOfBounds {
            row: at.row,
            col: at.col,
        })
    }
}

impl Level {
    /// The initial canvas: every tile ground, no powerups.
    pub fn new() -> Self {
        Self {
            grid: [TileKind::Ground; TILES],
            powerups: [None; TILES],
        }
    }

    pub fn tile(&self, at: Coord) -> TileKind {
        self.grid[at.index()]
    }

    pub fn powerup(&self, at: Coord) -> Option<PowerupKind> {
        self.powerups[at.index()]
    }

    pub fn tiles(&self) -> &[TileKind; TILES] {
        &self.grid
    }

    pub fn powerup_layer(&self) -> &[Option<PowerupKind>; TILES] {
        &self.powerups
    }

    /// All placed powerups in row-major order.
    pub fn powerups(&self) -> impl Iterator<Item = (Coord, PowerupKind)> + '_ {
        self.powerups
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|k| (Coord::from_index(i), k)))
    }

    pub fn powerup_count(&self) -> usize {
        self.powerups.iter().filter(|p| p.is_some()).count()
    }

    pub fn same_architecture(&self, other: &Level) -> bool {
        self.grid == other.grid
    }

    /// Paints one tile. Powerups are dropped from tiles that can no longer hold them.
    pub fn set_tile(&mut self, at: Coord, kind: TileKind) -> Result<()> {
        check_bounds(at)?;
        if at.is_base() && matches!(kind, TileKind::Wall | TileKind::Stairs) {
            return Err(LevelError::BaseTileProtected(at));
        }
        let i = at.index();
        self.grid[i] = kind;
        if !kind.holds_powerup() {
            self.powerups[i] = None;
        }
        Ok(())
    }

    /// Paints an inclusive rectangle given by two corners, skipping base tiles.
    pub fn paint_area(&mut self, a: Coord, b: Coord, kind: TileKind) -> Result<()> {
        if kind == TileKind::Stairs {
            return Err(LevelError::StairsAreaPaintForbidden);
        }
        check_bounds(a)?;
        check_bounds(b)?;
        for row in a.row.min(b.row)..=a.row.max(b.row) {
            for col in a.col.min(b.col)..=a.col.max(b.col) {
                let at = Coord { row, col };
                if at.is_base() {
                    continue;
                }
                self.set_tile(at, kind)?;
            }
        }
        Ok(())
    }

    pub fn set_powerup(&mut self, at: Coord, kind: PowerupKind) -> Result<()> {
        check_bounds(at)?;
        if !self.tile(at).holds_powerup() {
            return Err(LevelError::InvalidPowerupTile(at));
        }
        self.powerups[at.index()] = Some(kind);
        Ok(())
    }

    /// Eraser: removes a powerup, never architecture. Erasing an empty tile is a no-op.
    pub fn erase_powerup(&mut self, at: Coord) -> Result<()> {
        check_bounds(at)?;
        self.powerups[at.index()] = None;
        Ok(())
    }

    /// Drops every powerup, keeping the architecture.
    pub fn clear_powerups(&mut self) {
        self.powerups = [None; TILES];
    }

    fn glyph(&self, at: Coord) -> char {
        match self.powerup(at) {
            Some(p) => p.symbol(),
            None => self.tile(at).symbol(),
        }
    }

    /// Outgoing edges of the movement graph, in up/down/left/right order.
    pub fn moves_from(&self, at: Coord) -> impl Iterator<Item = Coord> + '_ {
        let from = self.tile(at);
        at.neighbors4().filter(move |n| TileKind::can_move(from, self.tile(*n)))
    }

    /// Incoming edges of the movement graph.
    pub fn moves_into(&self, at: Coord) -> impl Iterator<Item = Coord> + '_ {
        let to = self.tile(at);
        at.neighbors4().filter(move |n| TileKind::can_move(self.tile(*n), to))
    }

    fn bfs(&self, start: Coord, forward: bool) -> [u16; TILES] {
        let mut dist = [UNREACHABLE; TILES];
        if !self.tile(start).is_passable() {
            return dist;
        }
        let mut queue = VecDeque::with_capacity(TILES);
        dist[start.index()] = 0;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur.index()] + 1;
            let mut visit = |n: Coord| {
                if dist[n.index()] == UNREACHABLE {
                    dist[n.index()] = d;
                    queue.push_back(n);
                }
            };
            if forward {
                self.moves_from(cur).for_each(&mut visit);
            } else {
                self.moves_into(cur).for_each(&mut visit);
            }
        }
        dist
    }

    /// Step distances from `start` to every tile.
    pub fn distances_from(&self, start: Coord) -> [u16; TILES] {
        self.bfs(start, true)
    }

    /// Step distances from every tile to `goal`.
    pub fn distances_to(&self, goal: Coord) -> [u16; TILES] {
        self.bfs(goal, false)
    }

    /// Unweighted shortest path on the directed movement graph.
    pub fn shortest_path(&self, from: Coord, to: Coord) -> Result<PathResult> {
        for end in [from, to] {
            check_bounds(end)?;
            if !self.tile(end).is_passable() {
                return Err(LevelError::InvalidEndpoint(end));
            }
        }
        let to_goal = self.distances_to(to);
        Ok(self.path_along(from, to, &to_goal))
    }

    /// Walks a distance-to-goal table greedily; ties go to the first neighbour
    /// in up/down/left/right order.
    fn path_along(&self, from: Coord, to: Coord, to_goal: &[u16; TILES]) -> PathResult {
        let d = to_goal[from.index()];
        if d == UNREACHABLE {
            return PathResult::unreachable();
        }
        let mut path = Vec::with_capacity(d as usize + 1);
        let mut cur = from;
        path.push(cur);
        while cur != to {
            let want = to_goal[cur.index()] - 1;
            cur = self
                .moves_from(cur)
                .find(|n| to_goal[n.index()] == want)
                .expect("distance table is consistent with the movement graph");
            path.push(cur);
        }
        PathResult {
            reachable: true,
            length: d as usize,
            path,
        }
    }

    /// Full playability check.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let from1 = self.distances_from(BASE1);
        let from2 = self.distances_from(BASE2);
        if from1[BASE2.index()] == UNREACHABLE {
            violations.push(Violation::new(
                ViolationCode::BaseUnreachable,
                BASE2,
                "base 2 cannot be reached from base 1",
            ));
        }
        if from2[BASE1.index()] == UNREACHABLE {
            violations.push(Violation::new(
                ViolationCode::BaseUnreachable,
                BASE1,
                "base 1 cannot be reached from base 2",
            ));
        }
        for (at, kind) in self.powerups() {
            let i = at.index();
            if from1[i] == UNREACHABLE || from2[i] == UNREACHABLE {
                violations.push(Violation::new(
                    ViolationCode::PowerupUnreachable,
                    at,
                    format!("{kind:?} powerup cannot be reached from both bases"),
                ));
            }
        }
        for i in 0..TILES {
            if self.grid[i] != TileKind::Stairs {
                continue;
            }
            let at = Coord::from_index(i);
            let count = |kind: TileKind| at.neighbors4().filter(|n| self.tile(*n) == kind).count();
            let floors = count(TileKind::FirstFloor);
            if floors != 1 {
                violations.push(Violation::new(
                    ViolationCode::StairsAdjacency,
                    at,
                    format!("stairs must touch exactly one first-floor tile, found {floors}"),
                ));
            }
            if count(TileKind::Ground) == 0 {
                violations.push(Violation::new(
                    ViolationCode::StairsNoGroundAccess,
                    at,
                    "stairs must touch at least one ground tile",
                ));
            }
        }
        ValidationReport {
            playable: violations.is_empty(),
            violations,
        }
    }

    pub fn is_playable(&self) -> bool {
        self.validate().playable
    }

    /// Tiles matching a distance target, seen from `base`.
    fn target_tiles(&self, base: Coord, target: DistanceTarget) -> Vec<Coord> {
        match target {
            DistanceTarget::Powerup(kind) => self.powerups().filter(|(_, k)| *k == kind).map(|(c, _)| c).collect(),
            DistanceTarget::Stairs => (0..TILES)
                .filter(|&i| self.grid[i] == TileKind::Stairs)
                .map(Coord::from_index)
                .collect(),
            DistanceTarget::OpponentBase => vec![if base == BASE2 { BASE1 } else { BASE2 }],
        }
    }

    /// Mean step distance from `base` to every reachable tile of a type,
    /// plus the path to the closest one.
    pub fn avg_distance_to_type(&self, base: Coord, target: DistanceTarget) -> Result<DistanceSummary> {
        check_bounds(base)?;
        let targets = self.target_tiles(base, target);
        if targets.is_empty() {
            return Err(LevelError::NoSuchTarget);
        }
        let from = self.distances_from(base);
        let reachable: Vec<(Coord, u16)> = targets
            .into_iter()
            .map(|c| (c, from[c.index()]))
            .filter(|(_, d)| *d != UNREACHABLE)
            .collect();
        let Some(&(closest, _)) = reachable.iter().min_by_key(|(c, d)| (*d, *c)) else {
            return Err(LevelError::TargetUnreachable(base));
        };
        let mean = reachable.iter().map(|(_, d)| f64::from(*d)).sum::<f64>() / reachable.len() as f64;
        let nearest = self.path_along(base, closest, &self.distances_to(closest));
        Ok(DistanceSummary {
            mean,
            reachable_count: reachable.len(),
            nearest,
        })
    }

    pub fn tile_counts(&self) -> TileCounts {
        let mut counts = TileCounts::default();
        for kind in self.grid.iter() {
            match kind {
                TileKind::Ground => counts.ground += 1,
                TileKind::FirstFloor => counts.first_floor += 1,
                TileKind::Wall => counts.wall += 1,
                TileKind::Stairs => counts.stairs += 1,
            }
        }
        for (_, kind) in self.powerups() {
            match kind {
                PowerupKind::Health => counts.health += 1,
                PowerupKind::Armor => counts.armor += 1,
                PowerupKind::Damage => counts.damage += 1,
            }
        }
        counts
    }

    /// Architecture rows as `G/F/W/S` strings, top row first.
    pub fn grid_rows(&self) -> Vec<String> {
        (0..SIZE)
            .map(|row| (0..SIZE).map(|col| self.tile(Coord { row, col }).symbol()).collect())
            .collect()
    }

    /// Powerup rows as `./H/A/D` strings, top row first.
    pub fn powerup_rows(&self) -> Vec<String> {
        (0..SIZE)
            .map(|row| {
                (0..SIZE)
                    .map(|col| self.powerup(Coord { row, col }).map_or('.', PowerupKind::symbol))
                    .collect()
            })
            .collect()
    }

    /// Builds a level from row strings. `first_line` is the 1-based line of
    /// the first grid row, used for error positions; powerup rows follow
    /// `powerup_first_line`.
    pub fn from_rows<S: AsRef<str>>(
        grid: &[S],
        powerups: &[S],
        first_line: usize,
        powerup_first_line: usize,
    ) -> Result<Level> {
        let parse_err = |line: usize, column: usize, message: String| LevelError::Parse { line, column, message };
        if grid.len() != SIZE {
            return Err(parse_err(
                first_line,
                1,
                format!("expected {SIZE} grid rows, found {}", grid.len()),
            ));
        }
        if powerups.len() != SIZE {
            return Err(parse_err(
                powerup_first_line,
                1,
                format!("expected {SIZE} powerup rows, found {}", powerups.len()),
            ));
        }
        let mut level = Level::new();
        for (row, text) in grid.iter().enumerate() {
            let line = first_line + row;
            let text = text.as_ref();
            let mut n = 0;
            for (col, ch) in text.chars().enumerate() {
                n += 1;
                if col >= SIZE {
                    return Err(parse_err(line, col + 1, format!("grid row longer than {SIZE} tiles")));
                }
                let kind = TileKind::from_symbol(ch)
                    .ok_or_else(|| parse_err(line, col + 1, format!("unknown tile symbol {ch:?}")))?;
                level.grid[row * SIZE + col] = kind;
            }
            if n != SIZE {
                return Err(parse_err(
                    line,
                    n + 1,
                    format!("grid row has {n} tiles, expected {SIZE}"),
                ));
            }
        }
        for (row, text) in powerups.iter().enumerate() {
            let line = powerup_first_line + row;
            let text = text.as_ref();
            let mut n = 0;
            for (col, ch) in text.chars().enumerate() {
                n += 1;
                if col >= SIZE {
                    return Err(parse_err(
                        line,
                        col + 1,
                        format!("powerup row longer than {SIZE} tiles"),
                    ));
                }
                let kind = PowerupKind::from_symbol(ch)
                    .ok_or_else(|| parse_err(line, col + 1, format!("unknown powerup symbol {ch:?}")))?;
                if kind.is_some() && !level.grid[row * SIZE + col].holds_powerup() {
                    return Err(parse_err(line, col + 1, "powerup on a wall or stairs tile".into()));
                }
                level.powerups[row * SIZE + col] = kind;
            }
            if n != SIZE {
                return Err(parse_err(
                    line,
                    n + 1,
                    format!("powerup row has {n} tiles, expected {SIZE}"),
                ));
            }
        }
        for base in [BASE1, BASE2] {
            if level.tile(base) != TileKind::Ground {
                return Err(parse_err(
                    first_line + base.row,
                    base.col + 1,
                    "base tiles must be ground".into(),
                ));
            }
        }
        Ok(level)
    }

    /// Rotates the level by 180°, which swaps the two bases.
    pub fn rotated_half_turn(&self) -> Level {
        let mut out = Level::new();
        for i in 0..TILES {
            out.grid[TILES - 1 - i] = self.grid[i];
            out.powerups[TILES - 1 - i] = self.powerups[i];
        }
        out
    }

    /// Short content hash of the level (architecture and powerups).
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for row in self.grid_rows() {
            hasher.update(row.as_bytes());
        }
        for row in self.powerup_rows() {
            hasher.update(row.as_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

#[derive(Serialize, Deserialize)]
struct LevelRows {
    grid: Vec<String>,
    powerups: Vec<String>,
}

impl Serialize for Level {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LevelRows {
            grid: self.grid_rows(),
            powerups: self.powerup_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = LevelRows::deserialize(d)?;
        Level::from_rows(&rows.grid, &rows.powerups, 1, 1).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    BaseUnreachable,
    PowerupUnreachable,
    StairsAdjacency,
    StairsNoGroundAccess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub at: Coord,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, at: Coord, message: impl Into<String>) -> Self {
        Self {
            code,
            at,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub playable: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// `length` is in tile steps and is only meaningful when `reachable`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub reachable: bool,
    pub length: usize,
    pub path: Vec<Coord>,
}

impl PathResult {
    fn unreachable() -> Self {
        Self {
            reachable: false,
            length: 0,
            path: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "kind")]
pub enum DistanceTarget {
    Powerup(PowerupKind),
    Stairs,
    OpponentBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub mean: f64,
    pub reachable_count: usize,
    pub nearest: PathResult,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileCounts {
    pub ground: usize,
    pub first_floor: usize,
    pub wall: usize,
    pub stairs: usize,
    pub health: usize,
    pub armor: usize,
    pub damage: usize,
}

impl TileCounts {
    pub fn of_tile(&self, kind: TileKind) -> usize {
        match kind {
            TileKind::Ground => self.ground,
            TileKind::FirstFloor => self.first_floor,
            TileKind::Wall => self.wall,
            TileKind::Stairs => self.stairs,
        }
    }

    pub fn of_powerup(&self, kind: PowerupKind) -> usize {
        match kind {
            PowerupKind::Health => self.health,
            PowerupKind::Armor => self.armor,
            PowerupKind::Damage => self.damage,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(row: usize, col: usize) -> Coord {
        Coord::new(row, col)
    }

    #[test]
    fn set_tile_replaces_and_drops_powerup() {
        let mut level = Level::new();
        level.set_tile(c(3, 3), TileKind::Wall).unwrap();
        assert_eq!(level.tile(c(3, 3)), TileKind::Wall);

        let mut level = Level::new();
        level.set_powerup(c(3, 3), PowerupKind::Health).unwrap();
        level.set_tile(c(3, 3), TileKind::Wall).unwrap();
        assert_eq!(level.powerup(c(3, 3)), None);
    }

    #[test]
    fn first_floor_keeps_powerup() {
        let mut level = Level::new();
        level.set_powerup(c(4, 4), PowerupKind::Armor).unwrap();
        level.set_tile(c(4, 4), TileKind::FirstFloor).unwrap();
        assert_eq!(level.powerup(c(4, 4)), Some(PowerupKind::Armor));
    }

    #[test]
    fn bases_are_protected() {
        let mut level = Level::new();
        assert_eq!(
            level.set_tile(c(0, 0), TileKind::Wall),
            Err(LevelError::BaseTileProtected(c(0, 0)))
        );
        assert_eq!(
            level.set_tile(c(19, 19), TileKind::Stairs),
            Err(LevelError::BaseTileProtected(c(19, 19)))
        );
        assert!(level.set_tile(c(0, 0), TileKind::FirstFloor).is_ok());
        assert!(matches!(
            level.set_tile(c(20, 0), TileKind::Wall),
            Err(LevelError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn paint_area_rules() {
        let mut level = Level::new();
        level.set_tile(c(3, 3), TileKind::Wall).unwrap();
        level.paint_area(c(2, 2), c(4, 4), TileKind::Ground).unwrap();
        assert_eq!(level.tile_counts().ground, 400);

        let mut level = Level::new();
        level.paint_area(c(0, 0), c(2, 2), TileKind::Wall).unwrap();
        assert_eq!(level.tile(c(0, 0)), TileKind::Ground);
        assert_eq!(level.tile_counts().wall, 8);

        assert_eq!(
            Level::new().paint_area(c(1, 1), c(2, 2), TileKind::Stairs),
            Err(LevelError::StairsAreaPaintForbidden)
        );
    }

    #[test]
    fn powerup_placement_rules() {
        let mut level = Level::new();
        level.set_powerup(c(5, 5), PowerupKind::Health).unwrap();
        assert_eq!(level.powerup(c(5, 5)), Some(PowerupKind::Health));

        level.set_tile(c(6, 6), TileKind::Stairs).unwrap();
        assert_eq!(
            level.set_powerup(c(6, 6), PowerupKind::Armor),
            Err(LevelError::InvalidPowerupTile(c(6, 6)))
        );

        let before = level.clone();
        level.erase_powerup(c(9, 9)).unwrap();
        assert_eq!(level, before);
    }

    #[test]
    fn straight_line_path() {
        let level = Level::new();
        let p = level.shortest_path(c(0, 0), c(0, 5)).unwrap();
        assert!(p.reachable);
        assert_eq!(p.length, 5);
        assert_eq!(p.path.first(), Some(&c(0, 0)));
        assert_eq!(p.path.last(), Some(&c(0, 5)));
    }

    #[test]
    fn wall_endpoint_is_rejected() {
        let mut level = Level::new();
        level.set_tile(c(2, 2), TileKind::Wall).unwrap();
        assert_eq!(
            level.shortest_path(c(0, 0), c(2, 2)),
            Err(LevelError::InvalidEndpoint(c(2, 2)))
        );
    }

    #[test]
    fn stairs_checks() {
        // one first-floor neighbour and ground access: fine
        let mut level = Level::new();
        level.set_tile(c(5, 5), TileKind::FirstFloor).unwrap();
        level.set_tile(c(5, 6), TileKind::Stairs).unwrap();
        assert!(level.validate().playable);

        // zero first-floor neighbours
        let mut zero = Level::new();
        zero.set_tile(c(5, 6), TileKind::Stairs).unwrap();
        assert!(zero.validate().has(ViolationCode::StairsAdjacency));

        // two first-floor neighbours
        let mut two = level.clone();
        two.set_tile(c(5, 7), TileKind::FirstFloor).unwrap();
        assert!(two.validate().has(ViolationCode::StairsAdjacency));

        // no ground around
        let mut boxed = level.clone();
        for n in [c(4, 6), c(6, 6), c(5, 7)] {
            boxed.set_tile(n, TileKind::Wall).unwrap();
        }
        let report = boxed.validate();
        assert!(report.has(ViolationCode::StairsNoGroundAccess));
        assert!(!report.has(ViolationCode::StairsAdjacency));
    }

    #[test]
    fn distances_to_types() {
        let mut level = Level::new();
        level.set_powerup(c(0, 4), PowerupKind::Health).unwrap();
        level.set_powerup(c(3, 3), PowerupKind::Health).unwrap();
        let d = level
            .avg_distance_to_type(BASE1, DistanceTarget::Powerup(PowerupKind::Health))
            .unwrap();
        assert_eq!(d.mean, 5.0);
        assert_eq!(d.nearest.length, 4);

        let opp = level.avg_distance_to_type(BASE1, DistanceTarget::OpponentBase).unwrap();
        assert_eq!(opp.mean, 38.0);
        assert_eq!(opp.nearest.path.last(), Some(&BASE2));

        assert_eq!(
            level.avg_distance_to_type(BASE1, DistanceTarget::Powerup(PowerupKind::Damage)),
            Err(LevelError::NoSuchTarget)
        );
    }

    #[test]
    fn counts() {
        let mut level = Level::new();
        let counts = level.tile_counts();
        assert_eq!(counts.ground, 400);
        assert_eq!(counts.wall + counts.first_floor + counts.stairs + counts.health, 0);
        for col in 1..4 {
            level.set_powerup(c(10, col), PowerupKind::Health).unwrap();
        }
        assert_eq!(level.tile_counts().health, 3);
        level.paint_area(c(5, 5), c(9, 9), TileKind::Wall).unwrap();
        let counts = level.tile_counts();
        assert_eq!((counts.wall, counts.ground), (25, 375));
    }

    #[test]
    fn cell_indexing() {
        assert_eq!(c(0, 0).cell(), 0);
        assert_eq!(c(4, 19).cell(), 3);
        assert_eq!(c(5, 0).cell(), 4);
        assert_eq!(c(19, 19).cell(), 15);
        assert_eq!(cell_tiles(5).count(), 25);
        assert!(cell_tiles(5).all(|t| t.cell() == 5));
    }

    #[test]
    fn half_turn_swaps_bases() {
        let mut level = Level::new();
        level.set_powerup(c(0, 1), PowerupKind::Damage).unwrap();
        let r = level.rotated_half_turn();
        assert_eq!(r.powerup(c(19, 18)), Some(PowerupKind::Damage));
        assert_eq!(r.rotated_half_turn(), level);
    }
}
