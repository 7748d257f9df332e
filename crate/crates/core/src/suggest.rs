//! Balance-driven suggestions: best class pairings for a level, and powerup
//! layouts found by random replacement or a 1+1 evolution strategy.

use std::cell::Cell;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{CharacterClass, ClassKind, ClassPair};
use crate::level::{cell_tiles, Coord, Level, PowerupKind, ValidationReport, CELLS};
use crate::seed::{self, Rng};
use crate::surrogate::{encode_input, ModelInput, SurrogateError, SurrogateModel, Target};

/// Guards against division by a zero current fitness.
pub const IMPROVEMENT_EPSILON: f64 = 1e-6;
/// Probability that the replacement generator leaves a cell empty.
pub const EMPTY_CELL_PROBABILITY: f64 = 0.25;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum SuggestError {
    #[error("level is not playable")]
    UnplayableLevel(ValidationReport),
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("no playable candidate within {0} attempts")]
    RetryBudgetExhausted(usize),
    #[error("suggestion cancelled")]
    Cancelled,
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Balance of a matchup: 1 when both players score equally, 0 when one never does.
pub fn balance_fitness(kr: f64) -> f64 {
    1.0 - (2.0 * kr - 1.0).abs()
}

pub fn improvement_pct(suggested: f64, current: f64) -> f64 {
    100.0 * (suggested - current) / current.max(IMPROVEMENT_EPSILON)
}

/// Anything that can score kill ratios; each item in a batch counts as one evaluation.
pub trait KillRatioPredictor {
    fn predict_kr_batch(&self, items: &[(&Level, ClassPair)]) -> Result<Vec<f64>, SuggestError>;

    fn predict_kr(&self, level: &Level, pair: ClassPair) -> Result<f64, SuggestError> {
        Ok(self.predict_kr_batch(&[(level, pair)])?[0])
    }
}

fn presets(pair: ClassPair) -> (CharacterClass, CharacterClass) {
    (pair.class1.preset(), pair.class2.preset())
}

impl KillRatioPredictor for SurrogateModel {
    fn predict_kr_batch(&self, items: &[(&Level, ClassPair)]) -> Result<Vec<f64>, SuggestError> {
        if self.target != Target::KillRatio {
            return Err(SurrogateError::ModelNotLoaded(Target::KillRatio).into());
        }
        let inputs = items
            .iter()
            .map(|(level, pair)| {
                let (a, b) = presets(*pair);
                encode_input(level, &a, &b)
            })
            .collect::<Result<Vec<ModelInput>, _>>()?;
        let refs: Vec<&ModelInput> = inputs.iter().collect();
        Ok(self
            .predict_inputs(&refs)
            .into_iter()
            .map(|row| row[0].clamp(0.0, 1.0))
            .collect())
    }
}

/// Wraps a predictor and counts evaluations.
pub struct CountingPredictor<'a, P: ?Sized> {
    inner: &'a P,
    calls: Cell<usize>,
}

impl<'a, P: KillRatioPredictor + ?Sized> CountingPredictor<'a, P> {
    pub fn new(inner: &'a P) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

impl<P: KillRatioPredictor + ?Sized> KillRatioPredictor for CountingPredictor<'_, P> {
    fn predict_kr_batch(&self, items: &[(&Level, ClassPair)]) -> Result<Vec<f64>, SuggestError> {
        self.calls.set(self.calls.get() + items.len());
        self.inner.predict_kr_batch(items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Same,
    Different,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSuggestion {
    pub pair: ClassPair,
    pub predicted_kr: f64,
    pub fitness: f64,
    pub improvement_pct: f64,
    pub kind: PairKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSuggestions {
    pub best_same: ClassSuggestion,
    pub best_diff: ClassSuggestion,
    pub current_kr: f64,
    pub current_fitness: f64,
}

fn require_playable(level: &Level) -> Result<(), SuggestError> {
    let report = level.validate();
    if report.playable {
        Ok(())
    } else {
        Err(SuggestError::UnplayableLevel(report))
    }
}

/// Scores all 25 ordered preset pairs in one batch and keeps the most balanced
/// same-class and mixed pair. Ties go to the earlier pair in preset order.
pub fn suggest_class_pairs(
    predictor: &(impl KillRatioPredictor + ?Sized),
    level: &Level,
    current: ClassPair,
) -> Result<ClassSuggestions, SuggestError> {
    require_playable(level)?;
    let pairs: Vec<ClassPair> = ClassKind::ALL
        .iter()
        .flat_map(|&a| ClassKind::ALL.iter().map(move |&b| ClassPair::new(a, b)))
        .collect();
    let items: Vec<(&Level, ClassPair)> = pairs.iter().map(|&p| (level, p)).collect();
    let krs = predictor.predict_kr_batch(&items)?;
    let current_kr = krs[current.index()];
    let current_fitness = balance_fitness(current_kr);

    let best = |same: bool| {
        let mut best: Option<(ClassPair, f64)> = None;
        for (&pair, &kr) in pairs.iter().zip(&krs) {
            if pair.is_same() != same {
                continue;
            }
            if best.is_none_or(|(_, b)| balance_fitness(kr) > balance_fitness(b)) {
                best = Some((pair, kr));
            }
        }
        let (pair, kr) = best.expect("five same and twenty mixed pairs");
        let fitness = balance_fitness(kr);
        ClassSuggestion {
            pair,
            predicted_kr: kr,
            fitness,
            improvement_pct: improvement_pct(fitness, current_fitness),
            kind: if same { PairKind::Same } else { PairKind::Different },
        }
    };
    Ok(ClassSuggestions {
        best_same: best(true),
        best_diff: best(false),
        current_kr,
        current_fitness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestMethod {
    Replacement,
    Adjustment,
}

impl std::str::FromStr for SuggestMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replacement" => Ok(SuggestMethod::Replacement),
            "adjustment" => Ok(SuggestMethod::Adjustment),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Signed change in each powerup count relative to the seed level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerupDeltas {
    #[serde(rename = "Health")]
    pub health: i32,
    #[serde(rename = "Armor")]
    pub armor: i32,
    #[serde(rename = "Damage")]
    pub damage: i32,
}

impl PowerupDeltas {
    pub fn between(seed: &Level, suggested: &Level) -> Self {
        let count = |l: &Level, k: PowerupKind| l.powerups().filter(|&(_, p)| p == k).count() as i32;
        let d = |k| count(suggested, k) - count(seed, k);
        Self {
            health: d(PowerupKind::Health),
            armor: d(PowerupKind::Armor),
            damage: d(PowerupKind::Damage),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSuggestion {
    pub level: Level,
    pub predicted_kr: f64,
    pub fitness: f64,
    pub seed_fitness: f64,
    pub improvement_pct: f64,
    pub powerup_deltas: PowerupDeltas,
    pub method: SuggestMethod,
    /// Best fitness after each candidate (replacement) or generation (adjustment).
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuggestOptions {
    /// Candidates (replacement) or generations (adjustment).
    pub k: usize,
    pub seed: u64,
    /// Unplayable replacement candidates tolerated per requested candidate.
    pub retries_per_candidate: usize,
}

impl Default for SuggestOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            seed: 0,
            retries_per_candidate: 50,
        }
    }
}

/// Tiles a suggestion may put a powerup on: walkable and not a spawn point.
fn valid_tiles(level: &Level, cell: usize) -> Vec<Coord> {
    cell_tiles(cell)
        .filter(|&c| level.tile(c).holds_powerup() && !c.is_base())
        .collect()
}

fn random_kind(rng: &mut Rng) -> PowerupKind {
    PowerupKind::ALL[rng.gen_range(0..PowerupKind::ALL.len())]
}

/// One replacement candidate: every powerup removed, then each cell either left
/// empty (probability 0.25) or given one random powerup on a random valid tile.
/// Cells with no valid tile stay empty. Playability is not checked here.
pub fn replacement_candidate(seed_level: &Level, rng: &mut Rng) -> Level {
    let mut level = seed_level.clone();
    level.clear_powerups();
    for cell in 0..CELLS {
        let tiles = valid_tiles(&level, cell);
        if rng.gen_bool(EMPTY_CELL_PROBABILITY) || tiles.is_empty() {
            continue;
        }
        let at = tiles[rng.gen_range(0..tiles.len())];
        level.set_powerup(at, random_kind(rng)).expect("valid tile");
    }
    level
}

fn finish(
    seed_level: &Level,
    best: Level,
    best_kr: f64,
    seed_fitness: f64,
    method: SuggestMethod,
    history: Vec<f64>,
) -> LevelSuggestion {
    let fitness = balance_fitness(best_kr);
    LevelSuggestion {
        powerup_deltas: PowerupDeltas::between(seed_level, &best),
        level: best,
        predicted_kr: best_kr,
        fitness,
        seed_fitness,
        improvement_pct: improvement_pct(fitness, seed_fitness),
        method,
        history,
    }
}

/// Samples `k` playable replacement candidates and returns the most balanced.
pub fn suggest_powerups_replacement(
    predictor: &(impl KillRatioPredictor + ?Sized),
    level: &Level,
    pair: ClassPair,
    opts: &SuggestOptions,
    cancelled: &dyn Fn() -> bool,
) -> Result<LevelSuggestion, SuggestError> {
    require_playable(level)?;
    if opts.k == 0 {
        return Err(SuggestError::InvalidBudget);
    }
    let mut rng = seed::rng(seed::derive(opts.seed, &[0x5e9]));
    let budget = opts.k * opts.retries_per_candidate.max(1);
    let mut candidates = Vec::with_capacity(opts.k);
    let mut attempts = 0;
    while candidates.len() < opts.k {
        if cancelled() {
            return Err(SuggestError::Cancelled);
        }
        if attempts == budget {
            return Err(SuggestError::RetryBudgetExhausted(budget));
        }
        attempts += 1;
        let candidate = replacement_candidate(level, &mut rng);
        if candidate.is_playable() {
            candidates.push(candidate);
        }
    }
    let mut items: Vec<(&Level, ClassPair)> = vec![(level, pair)];
    items.extend(candidates.iter().map(|c| (c, pair)));
    let krs = predictor.predict_kr_batch(&items)?;
    if cancelled() {
        return Err(SuggestError::Cancelled);
    }
    let seed_fitness = balance_fitness(krs[0]);
    let mut best = 0;
    let mut history = Vec::with_capacity(opts.k);
    for i in 0..opts.k {
        if balance_fitness(krs[i + 1]) > balance_fitness(krs[best + 1]) {
            best = i;
        }
        history.push(balance_fitness(krs[best + 1]));
    }
    let best_kr = krs[best + 1];
    let best_level = candidates.swap_remove(best);
    Ok(finish(
        level,
        best_level,
        best_kr,
        seed_fitness,
        SuggestMethod::Replacement,
        history,
    ))
}

/// The four adjustment mutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Every powerup moves to another valid tile of its own cell.
    MoveWithinCell,
    /// Every powerup moves to a valid tile of a different cell.
    MoveToOtherCell,
    /// Every powerup changes to a different kind.
    ChangeKind,
    /// One random cell gains a powerup if it has none, otherwise loses one.
    ToggleCell,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::MoveWithinCell,
        Mutation::MoveToOtherCell,
        Mutation::ChangeKind,
        Mutation::ToggleCell,
    ];
}

fn free_tiles(level: &Level, cell: usize) -> Vec<Coord> {
    valid_tiles(level, cell)
        .into_iter()
        .filter(|&c| level.powerup(c).is_none())
        .collect()
}

/// Applies `op` to a copy of `level`. A powerup with nowhere to go stays put.
pub fn mutate(level: &Level, op: Mutation, rng: &mut Rng) -> Level {
    let mut out = level.clone();
    let placed: Vec<(Coord, PowerupKind)> = level.powerups().collect();
    match op {
        Mutation::MoveWithinCell | Mutation::MoveToOtherCell => {
            for (from, kind) in placed {
                let cell = from.cell();
                let dest_cell = if op == Mutation::MoveWithinCell {
                    cell
                } else {
                    let others: Vec<usize> = (0..CELLS)
                        .filter(|&c| c != cell && !free_tiles(&out, c).is_empty())
                        .collect();
                    match others.choose(rng) {
                        Some(&c) => c,
                        None => continue,
                    }
                };
                if let Some(&to) = free_tiles(&out, dest_cell).choose(rng) {
                    out.erase_powerup(from).expect("in bounds");
                    out.set_powerup(to, kind).expect("valid tile");
                }
            }
        }
        Mutation::ChangeKind => {
            for (at, kind) in placed {
                let others: Vec<PowerupKind> = PowerupKind::ALL.into_iter().filter(|&k| k != kind).collect();
                let new = *others.choose(rng).expect("three kinds");
                out.set_powerup(at, new).expect("tile already holds a powerup");
            }
        }
        Mutation::ToggleCell => {
            let cell = rng.gen_range(0..CELLS);
            let present: Vec<Coord> = cell_tiles(cell).filter(|&c| out.powerup(c).is_some()).collect();
            if let Some(&at) = present.choose(rng) {
                out.erase_powerup(at).expect("in bounds");
            } else if let Some(&at) = free_tiles(&out, cell).choose(rng) {
                let kind = random_kind(rng);
                out.set_powerup(at, kind).expect("valid tile");
            }
        }
    }
    out
}

/// 1+1 evolution strategy over `k` generations. A mutant replaces the champion
/// only when it is playable and strictly more balanced.
pub fn suggest_powerups_adjustment(
    predictor: &(impl KillRatioPredictor + ?Sized),
    level: &Level,
    pair: ClassPair,
    opts: &SuggestOptions,
    cancelled: &dyn Fn() -> bool,
) -> Result<LevelSuggestion, SuggestError> {
    require_playable(level)?;
    if opts.k == 0 {
        return Err(SuggestError::InvalidBudget);
    }
    let mut rng = seed::rng(seed::derive(opts.seed, &[0xad7]));
    let seed_kr = predictor.predict_kr(level, pair)?;
    let seed_fitness = balance_fitness(seed_kr);
    let mut champion = level.clone();
    let (mut champ_kr, mut champ_f) = (seed_kr, seed_fitness);
    let mut history = Vec::with_capacity(opts.k);
    for _ in 0..opts.k {
        if cancelled() {
            return Err(SuggestError::Cancelled);
        }
        let op = Mutation::ALL[rng.gen_range(0..Mutation::ALL.len())];
        let mutant = mutate(&champion, op, &mut rng);
        if mutant != champion && mutant.is_playable() {
            let kr = predictor.predict_kr(&mutant, pair)?;
            let f = balance_fitness(kr);
            if f > champ_f {
                champion = mutant;
                champ_kr = kr;
                champ_f = f;
            }
        }
        history.push(champ_f);
    }
    Ok(finish(
        level,
        champion,
        champ_kr,
        seed_fitness,
        SuggestMethod::Adjustment,
        history,
    ))
}

/// Dispatches to the chosen powerup method.
pub fn suggest_powerups(
    predictor: &(impl KillRatioPredictor + ?Sized),
    level: &Level,
    pair: ClassPair,
    method: SuggestMethod,
    opts: &SuggestOptions,
    cancelled: &dyn Fn() -> bool,
) -> Result<LevelSuggestion, SuggestError> {
    match method {
        SuggestMethod::Replacement => suggest_powerups_replacement(predictor, level, pair, opts, cancelled),
        SuggestMethod::Adjustment => suggest_powerups_adjustment(predictor, level, pair, opts, cancelled),
    }
}

/// Number of powerups in each 5×5 cell.
pub fn powerups_per_cell(level: &Level) -> [usize; CELLS] {
    let mut out = [0; CELLS];
    for (at, _) in level.powerups() {
        out[at.cell()] += 1;
    }
    out
}
