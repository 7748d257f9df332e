//! Random level generation and the training corpus of simulated matches.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ClassKind, ClassPair, CLASS_PARAMS};
use crate::level::{Coord, Level, PowerupKind, TileKind, ViolationCode, BASE1, BASE2, SIZE, TILES, UNREACHABLE};
use crate::metrics::{extract_metrics, GameplayMetrics};
use crate::seed::{self, Rng};
use crate::sim::{is_valid_match, simulate_match};

pub const CORPUS_VERSION: u32 = 1;
const GENERATION_RETRIES: usize = 100;
const REPAIR_ROUNDS: usize = 200;
const MATCH_ATTEMPTS: u64 = 1000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no playable level after {0} generation attempts")]
    GenerationExhausted(usize),
    #[error("record {index}: no valid match after {attempts} attempts")]
    NoValidMatch { index: usize, attempts: u64 },
    #[error("record {index}: {source}")]
    Io {
        index: usize,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub wall_density: f64,
    pub platform_count: usize,
    pub powerup_count: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            wall_density: 0.1,
            platform_count: 2,
            powerup_count: 8,
        }
    }
}

impl GeneratorParams {
    fn check(&self) -> Result<(), CorpusError> {
        if !(0.0..=0.5).contains(&self.wall_density) {
            return Err(CorpusError::InvalidParameter(format!(
                "wall_density {} outside [0, 0.5]",
                self.wall_density
            )));
        }
        if self.platform_count > 10 || self.powerup_count > 64 {
            return Err(CorpusError::InvalidParameter(
                "platform_count must be <= 10 and powerup_count <= 64".into(),
            ));
        }
        Ok(())
    }
}

fn count_around(level: &Level, at: Coord, kind: TileKind) -> usize {
    at.neighbors4().filter(|n| level.tile(*n) == kind).count()
}

fn stairs_ok(level: &Level, at: Coord) -> bool {
    count_around(level, at, TileKind::FirstFloor) == 1 && count_around(level, at, TileKind::Ground) >= 1
}

/// Ground tiles just outside a platform rectangle where a legal stair fits
/// without breaking any existing stair.
fn stair_candidates(level: &Level, r0: usize, c0: usize, h: usize, w: usize) -> Vec<Coord> {
    let inside = |c: Coord| c.row >= r0 && c.row < r0 + h && c.col >= c0 && c.col < c0 + w;
    let mut out = Vec::new();
    for row in r0.saturating_sub(1)..(r0 + h + 1).min(SIZE) {
        for col in c0.saturating_sub(1)..(c0 + w + 1).min(SIZE) {
            let at = Coord::new(row, col);
            if inside(at) || at.is_base() || level.tile(at) != TileKind::Ground {
                continue;
            }
            if !at
                .neighbors4()
                .any(|n| inside(n) && level.tile(n) == TileKind::FirstFloor)
            {
                continue;
            }
            if !stairs_ok(level, at) {
                continue;
            }
            let mut trial = level.clone();
            trial.set_tile(at, TileKind::Stairs).expect("non-base tile");
            let breaks_neighbor = at
                .neighbors4()
                .any(|n| trial.tile(n) == TileKind::Stairs && !stairs_ok(&trial, n));
            if !breaks_neighbor {
                out.push(at);
            }
        }
    }
    out
}

fn reachable_set(level: &Level, from: Coord) -> Vec<bool> {
    level.distances_from(from).iter().map(|d| *d != UNREACHABLE).collect()
}

/// One repair pass; returns false when nothing could be changed.
fn repair(level: &mut Level, rng: &mut Rng) -> bool {
    let report = level.validate();
    let mut changed = false;
    for v in &report.violations {
        match v.code {
            ViolationCode::StairsAdjacency | ViolationCode::StairsNoGroundAccess => {
                if level.tile(v.at) == TileKind::Stairs {
                    level
                        .set_tile(v.at, TileKind::Ground)
                        .expect("stairs are never on a base");
                    changed = true;
                }
            }
            ViolationCode::PowerupUnreachable => {
                level.erase_powerup(v.at).expect("in bounds");
                changed = true;
            }
            ViolationCode::BaseUnreachable => {
                let from = if v.at == BASE2 { BASE1 } else { BASE2 };
                let region = reachable_set(level, from);
                let blockers: Vec<Coord> = (0..TILES)
                    .filter(|&i| region[i])
                    .flat_map(|i| Coord::from_index(i).neighbors4())
                    .filter(|n| !region[n.index()] && matches!(level.tile(*n), TileKind::Wall | TileKind::FirstFloor))
                    .collect();
                if let Some(&b) = blockers.choose(rng) {
                    level.set_tile(b, TileKind::Ground).expect("in bounds");
                    changed = true;
                }
            }
        }
    }
    changed
}

fn generate_once(params: &GeneratorParams, rng: &mut Rng) -> Option<Level> {
    let mut level = Level::new();

    let mut platforms = Vec::with_capacity(params.platform_count);
    for _ in 0..params.platform_count {
        let h = rng.gen_range(3..=8);
        let w = rng.gen_range(3..=8);
        let r0 = rng.gen_range(0..=SIZE - h);
        let c0 = rng.gen_range(0..=SIZE - w);
        for row in r0..r0 + h {
            for col in c0..c0 + w {
                let at = Coord::new(row, col);
                if !at.is_base() {
                    level.set_tile(at, TileKind::FirstFloor).expect("in bounds");
                }
            }
        }
        platforms.push((r0, c0, h, w));
    }
    for &(r0, c0, h, w) in &platforms {
        if let Some(&at) = stair_candidates(&level, r0, c0, h, w).choose(rng) {
            level.set_tile(at, TileKind::Stairs).expect("non-base tile");
        }
    }

    let near_stairs = |level: &Level, at: Coord| {
        level.tile(at) == TileKind::Stairs || at.neighbors4().any(|n| level.tile(n) == TileKind::Stairs)
    };
    let mut eligible: Vec<Coord> = (0..TILES)
        .map(Coord::from_index)
        .filter(|c| !c.is_base() && !near_stairs(&level, *c))
        .collect();
    let walls = ((params.wall_density * TILES as f64).round() as usize).min(eligible.len());
    let (chosen, _) = eligible.partial_shuffle(rng, walls);
    for &at in chosen.iter() {
        level.set_tile(at, TileKind::Wall).expect("non-base tile");
    }

    let mut spots: Vec<Coord> = (0..TILES)
        .map(Coord::from_index)
        .filter(|c| level.tile(*c).holds_powerup())
        .collect();
    let n = params.powerup_count.min(spots.len());
    let (chosen, _) = spots.partial_shuffle(rng, n);
    for &at in chosen.iter() {
        let kind = PowerupKind::ALL[rng.gen_range(0..3)];
        level.set_powerup(at, kind).expect("valid tile");
    }

    for _ in 0..REPAIR_ROUNDS {
        if level.is_playable() {
            return Some(level);
        }
        if !repair(&mut level, rng) {
            return None;
        }
    }
    None
}

/// Constructive generator: platforms with stairs, scattered walls and
/// powerups, then a repair loop until the level is playable.
pub fn generate_random_level(seed: u64, params: &GeneratorParams) -> Result<Level, CorpusError> {
    params.check()?;
    for attempt in 0..GENERATION_RETRIES {
        let mut rng = seed::rng(seed::derive(seed, &[attempt as u64]));
        if let Some(level) = generate_once(params, &mut rng) {
            return Ok(level);
        }
    }
    Err(CorpusError::GenerationExhausted(GENERATION_RETRIES))
}

/// One training example: a level, the matchup and the measured outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    /// Simulation seed; re-running the match reproduces `metrics`.
    pub seed: u64,
    pub class1: ClassKind,
    pub class2: ClassKind,
    /// Normalized class parameters, as fed to the surrogate networks.
    pub class1_params: [f64; CLASS_PARAMS],
    pub class2_params: [f64; CLASS_PARAMS],
    pub level: Level,
    pub metrics: GameplayMetrics,
}

impl CorpusRecord {
    pub fn classes(&self) -> ClassPair {
        ClassPair::new(self.class1, self.class2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub version: u32,
    pub n: usize,
    pub seed: u64,
    pub generator: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub records: Vec<CorpusRecord>,
}

fn round6<const N: usize>(v: [f64; N]) -> [f64; N] {
    v.map(|x| (x * 1e6).round() / 1e6)
}

/// Builds record `index`: the class pair is drawn once, then levels and
/// match seeds are resampled until the match is valid.
pub fn build_record(seed: u64, index: usize, params: &GeneratorParams) -> Result<CorpusRecord, CorpusError> {
    let mut pair_rng = seed::rng(seed::derive(seed, &[index as u64, u64::MAX]));
    let pair = ClassPair::from_index(pair_rng.gen_range(0..25));
    let (c1, c2) = (pair.class1.preset(), pair.class2.preset());
    for attempt in 0..MATCH_ATTEMPTS {
        let base = seed::derive(seed, &[index as u64, attempt]);
        let level = generate_random_level(seed::derive(base, &[1]), params)?;
        let match_seed = seed::derive(base, &[2]);
        let trace = simulate_match(&level, &c1, &c2, match_seed).expect("generated levels are playable");
        if !is_valid_match(&trace) {
            continue;
        }
        return Ok(CorpusRecord {
            seed: match_seed,
            class1: pair.class1,
            class2: pair.class2,
            class1_params: round6(c1.normalized().expect("presets are in range")),
            class2_params: round6(c2.normalized().expect("presets are in range")),
            level,
            metrics: extract_metrics(&trace).rounded(),
        });
    }
    Err(CorpusError::NoValidMatch {
        index,
        attempts: MATCH_ATTEMPTS,
    })
}

/// Builds `n` records and writes them as newline-delimited JSON after a
/// header line. Records are simulated in parallel chunks and written in
/// index order; `progress` receives the number of records written so far.
pub fn build_corpus<W: Write>(
    n: usize,
    seed: u64,
    params: &GeneratorParams,
    out: &mut W,
    mut progress: impl FnMut(usize),
) -> Result<CorpusHeader, CorpusError> {
    if n == 0 {
        return Err(CorpusError::InvalidParameter("corpus size must be at least 1".into()));
    }
    params.check()?;
    let header = CorpusHeader {
        version: CORPUS_VERSION,
        n,
        seed,
        generator: *params,
    };
    let io_err = |index: usize| move |source: io::Error| CorpusError::Io { index, source };
    serde_json::to_writer(&mut *out, &header).map_err(|e| io_err(0)(e.into()))?;
    out.write_all(b"\n").map_err(io_err(0))?;

    const CHUNK: usize = 256;
    let mut written = 0;
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let records: Vec<CorpusRecord> = (start..end)
            .into_par_iter()
            .map(|i| build_record(seed, i, params))
            .collect::<Result<_, _>>()?;
        for (offset, record) in records.iter().enumerate() {
            let index = start + offset;
            serde_json::to_writer(&mut *out, record).map_err(|e| io_err(index)(e.into()))?;
            out.write_all(b"\n").map_err(io_err(index))?;
        }
        written = end;
        progress(written);
    }
    out.flush().map_err(io_err(written))?;
    Ok(header)
}

/// Builds a corpus in memory (same records as [`build_corpus`]).
pub fn build_corpus_records(n: usize, seed: u64, params: &GeneratorParams) -> Result<Corpus, CorpusError> {
    let mut buf = Vec::new();
    build_corpus(n, seed, params, &mut buf, |_| {})?;
    read_corpus(&buf[..])
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Corpus, CorpusError> {
    let mut lines = input.lines().enumerate();
    let fmt = |line: usize, message: String| CorpusError::Format { line, message };
    let (_, first) = lines.next().ok_or_else(|| fmt(1, "empty corpus file".into()))?;
    let first = first.map_err(|e| CorpusError::Io { index: 0, source: e })?;
    let header: CorpusHeader = serde_json::from_str(&first).map_err(|e| fmt(1, e.to_string()))?;
    if header.version != CORPUS_VERSION {
        return Err(fmt(1, format!("unsupported corpus version {}", header.version)));
    }
    let mut records = Vec::with_capacity(header.n);
    for (i, line) in lines {
        let line = line.map_err(|e| CorpusError::Io { index: i, source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| fmt(i + 1, e.to_string()))?;
        records.push(record);
    }
    if records.len() != header.n {
        return Err(fmt(
            records.len() + 1,
            format!("header announces {} records, found {}", header.n, records.len()),
        ));
    }
    Ok(Corpus { header, records })
}

/// Train / test partition by record index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Random holdout split: `ratio` of the records go to the test side.
pub fn split_dataset(len: usize, ratio: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidParameter(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n_test = (ratio * len as f64).round() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    Ok(DatasetSplit { train, test, seed })
}
