//! Tick-based two-player deathmatch simulation.
//!
//! Agents walk the level's movement graph, seek health when hurt, otherwise
//! close in on the opponent, and fire whenever the opponent is inside weapon
//! range with a clear line of sight. The whole match is a pure function of
//! level, classes, seed and [`SimConfig`].

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{CharacterClass, ClassKind, ClassPair};
use crate::level::{Coord, Level, PowerupKind, TileKind, BASE1, BASE2, TILES, UNREACHABLE};
use crate::seed::{self, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("level is not playable ({0} violations)")]
    UnplayableLevel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ticks_per_second: u32,
    /// Seconds.
    pub time_limit: f64,
    pub kill_limit: usize,
    pub respawn_delay: f64,
    pub powerup_respawn: f64,
    pub damage_boost_duration: f64,
    pub armor_amount: f64,
    pub health_amount: f64,
    /// Agents go for health below this fraction of their maximum HP.
    pub health_seek_fraction: f64,
    /// Hit chance falls linearly to `1 - falloff` of accuracy at maximum range.
    pub range_falloff: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ticks_per_second: 10,
            time_limit: 600.0,
            kill_limit: 20,
            respawn_delay: 3.0,
            powerup_respawn: 30.0,
            damage_boost_duration: 10.0,
            armor_amount: 50.0,
            health_amount: 50.0,
            health_seek_fraction: 0.4,
            range_falloff: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn base(self) -> Coord {
        match self {
            Player::One => BASE1,
            Player::Two => BASE2,
        }
    }
}

impl From<Player> for u8 {
    fn from(p: Player) -> u8 {
        match p {
            Player::One => 1,
            Player::Two => 2,
        }
    }
}

impl TryFrom<u8> for Player {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Player::One),
            2 => Ok(Player::Two),
            other => Err(format!("player id must be 1 or 2, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillEvent {
    /// Seconds since match start.
    #[serde(rename = "t")]
    pub time: f64,
    pub victim: Player,
    /// Tile the victim died on.
    #[serde(flatten)]
    pub location: Coord,
}

/// One simulated match; serialises as a corpus trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameplayTrace {
    pub seed: u64,
    pub class1: ClassKind,
    pub class2: ClassKind,
    pub level_hash: String,
    pub ended_at: f64,
    pub events: Vec<KillEvent>,
}

impl GameplayTrace {
    pub fn kills_by(&self, player: Player) -> usize {
        self.events.iter().filter(|e| e.victim == player.other()).count()
    }
}

/// A match reaching the kill limit inside the time limit.
pub fn is_valid_match(trace: &GameplayTrace) -> bool {
    is_valid_match_with(trace, &SimConfig::default())
}

pub fn is_valid_match_with(trace: &GameplayTrace, config: &SimConfig) -> bool {
    trace.events.len() == config.kill_limit && trace.ended_at <= config.time_limit
}

#[derive(Debug, Clone, Copy)]
struct PowerupSpot {
    at: Coord,
    kind: PowerupKind,
    available_at: f64,
}

#[derive(Debug, Clone)]
struct Agent {
    class: CharacterClass,
    base: Coord,
    pos: Coord,
    alive: bool,
    respawn_tick: u64,
    hp: f64,
    armor: f64,
    boost_until: f64,
    clip: u32,
    reload_done: Option<f64>,
    next_shot: f64,
    progress: f64,
}

impl Agent {
    fn new(class: CharacterClass, base: Coord) -> Self {
        Self {
            class,
            base,
            pos: base,
            alive: true,
            respawn_tick: 0,
            hp: class.hit_points,
            armor: 0.0,
            boost_until: f64::NEG_INFINITY,
            clip: clip_of(&class),
            reload_done: None,
            next_shot: 0.0,
            progress: 0.0,
        }
    }

    fn respawn(&mut self, t: f64) {
        self.pos = self.base;
        self.alive = true;
        self.hp = self.class.hit_points;
        self.armor = 0.0;
        self.boost_until = f64::NEG_INFINITY;
        self.clip = clip_of(&self.class);
        self.reload_done = None;
        self.next_shot = t;
        self.progress = 0.0;
    }
}

fn clip_of(class: &CharacterClass) -> u32 {
    class.weapon.clip_size.round().max(1.0) as u32
}

fn euclid(a: Coord, b: Coord) -> f64 {
    let dr = a.row as f64 - b.row as f64;
    let dc = a.col as f64 - b.col as f64;
    (dr * dr + dc * dc).sqrt()
}

/// Bresenham walk from `a` to `b`; true when no intermediate tile is a wall.
fn ray_clear(level: &Level, a: Coord, b: Coord) -> bool {
    let (mut x, mut y) = (a.col as i64, a.row as i64);
    let (x1, y1) = (b.col as i64, b.row as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if (x, y) == (x1, y1) {
            return true;
        }
        if (x, y) != (a.col as i64, a.row as i64) && level.tile(Coord::new(y as usize, x as usize)) == TileKind::Wall {
            return false;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Line of sight: walls block, elevation does not. Checked in both
/// directions so visibility is mutual.
pub fn line_of_sight(level: &Level, a: Coord, b: Coord) -> bool {
    ray_clear(level, a, b) && ray_clear(level, b, a)
}

/// A match in progress. [`simulate_match`] drives it to completion; tests
/// and tools can step it tick by tick.
pub struct Match<'a> {
    level: &'a Level,
    config: SimConfig,
    classes: ClassPair,
    seed: u64,
    agents: [Agent; 2],
    spots: Vec<PowerupSpot>,
    to_goal: Vec<Option<Box<[u16; TILES]>>>,
    rng: Rng,
    tick: u64,
    events: Vec<KillEvent>,
    ended_at: Option<f64>,
}

impl<'a> Match<'a> {
    pub fn new(
        level: &'a Level,
        c1: &CharacterClass,
        c2: &CharacterClass,
        seed: u64,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let report = level.validate();
        if !report.playable {
            return Err(SimError::UnplayableLevel(report.violations.len()));
        }
        let spots = level
            .powerups()
            .map(|(at, kind)| PowerupSpot {
                at,
                kind,
                available_at: 0.0,
            })
            .collect();
        Ok(Self {
            level,
            config,
            classes: ClassPair::new(c1.kind, c2.kind),
            seed,
            agents: [Agent::new(*c1, BASE1), Agent::new(*c2, BASE2)],
            spots,
            to_goal: vec![None; TILES],
            rng: seed::rng(seed),
            tick: 0,
            events: Vec::with_capacity(config.kill_limit),
            ended_at: None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.ended_at.is_some()
    }

    /// Seconds elapsed.
    pub fn time(&self) -> f64 {
        self.tick as f64 / f64::from(self.config.ticks_per_second)
    }

    /// Tile of each living agent.
    pub fn positions(&self) -> [Option<Coord>; 2] {
        [0, 1].map(|i| self.agents[i].alive.then_some(self.agents[i].pos))
    }

    pub fn events(&self) -> &[KillEvent] {
        &self.events
    }

    fn table(&mut self, goal: Coord) -> &[u16; TILES] {
        let level = self.level;
        self.to_goal[goal.index()].get_or_insert_with(|| Box::new(level.distances_to(goal)))
    }

    fn distance(&mut self, from: Coord, goal: Coord) -> u16 {
        self.table(goal)[from.index()]
    }

    /// One step along a shortest path, ties broken at random.
    fn next_tile(&mut self, from: Coord, goal: Coord) -> Option<Coord> {
        let level = self.level;
        let table = *self.table(goal);
        let d = table[from.index()];
        if d == UNREACHABLE || d == 0 {
            return None;
        }
        let mut options = [from; 4];
        let mut n = 0;
        for next in level.moves_from(from) {
            if table[next.index()] == d - 1 {
                options[n] = next;
                n += 1;
            }
        }
        match n {
            0 => None,
            1 => Some(options[0]),
            _ => Some(options[self.rng.gen_range(0..n)]),
        }
    }

    fn goal_for(&mut self, slot: usize, t: f64) -> (Coord, bool) {
        let me = self.agents[slot].clone();
        let opp = &self.agents[1 - slot];
        let opp_goal = if opp.alive { opp.pos } else { opp.base };
        if me.hp < self.config.health_seek_fraction * me.class.hit_points {
            let mut best: Vec<Coord> = Vec::new();
            let mut best_d = UNREACHABLE;
            let healths: Vec<Coord> = self
                .spots
                .iter()
                .filter(|s| s.kind == PowerupKind::Health && s.available_at <= t)
                .map(|s| s.at)
                .collect();
            for at in healths {
                let d = self.distance(me.pos, at);
                if d < best_d {
                    best_d = d;
                    best.clear();
                }
                if d == best_d && d != UNREACHABLE {
                    best.push(at);
                }
            }
            if !best.is_empty() {
                let pick = if best.len() == 1 {
                    0
                } else {
                    self.rng.gen_range(0..best.len())
                };
                return (best[pick], true);
            }
        }
        (opp_goal, false)
    }

    fn engaged(&self, slot: usize) -> bool {
        let me = &self.agents[slot];
        let opp = &self.agents[1 - slot];
        me.alive
            && opp.alive
            && euclid(me.pos, opp.pos) <= me.class.weapon.range
            && line_of_sight(self.level, me.pos, opp.pos)
    }

    fn pick_up(&mut self, slot: usize, t: f64) {
        let pos = self.agents[slot].pos;
        let cfg = self.config;
        let Some(spot) = self.spots.iter_mut().find(|s| s.at == pos && s.available_at <= t) else {
            return;
        };
        let agent = &mut self.agents[slot];
        let taken = match spot.kind {
            PowerupKind::Health if agent.hp < agent.class.hit_points => {
                agent.hp = (agent.hp + cfg.health_amount).min(agent.class.hit_points);
                true
            }
            PowerupKind::Armor if agent.armor < cfg.armor_amount => {
                agent.armor = cfg.armor_amount;
                true
            }
            PowerupKind::Damage => {
                agent.boost_until = t + cfg.damage_boost_duration;
                true
            }
            _ => false,
        };
        if taken {
            spot.available_at = t + cfg.powerup_respawn;
        }
    }

    /// Damage dealt by `slot` this tick.
    fn fire(&mut self, slot: usize, t: f64) -> f64 {
        if !self.engaged(slot) {
            return 0.0;
        }
        let tick = 1.0 / f64::from(self.config.ticks_per_second);
        let falloff = self.config.range_falloff;
        let dist = euclid(self.agents[slot].pos, self.agents[1 - slot].pos);
        let agent = &mut self.agents[slot];
        if agent.reload_done.is_some() || agent.clip == 0 {
            return 0.0;
        }
        let w = agent.class.weapon;
        if agent.next_shot < t - tick {
            agent.next_shot = t;
        }
        let p_hit = w.accuracy * (1.0 - falloff * dist / w.range);
        let per_hit = if agent.boost_until > t {
            2.0 * w.damage
        } else {
            w.damage
        };
        let mut dealt = 0.0;
        while agent.next_shot <= t + 1e-9 && agent.clip > 0 {
            if self.rng.gen::<f64>() < p_hit {
                dealt += per_hit;
            }
            agent.clip -= 1;
            agent.next_shot += 1.0 / w.rate_of_fire;
        }
        if agent.clip == 0 {
            agent.reload_done = Some(t + w.reload_time);
        }
        dealt
    }

    /// Advances one tick. Returns false once the match is over.
    pub fn step(&mut self) -> bool {
        if self.ended_at.is_some() {
            return false;
        }
        self.tick += 1;
        let tps = f64::from(self.config.ticks_per_second);
        let t = self.time();

        for agent in &mut self.agents {
            if !agent.alive && self.tick >= agent.respawn_tick {
                agent.respawn(t);
            }
            if let Some(done) = agent.reload_done {
                if agent.alive && done <= t + 1e-9 {
                    agent.reload_done = None;
                    agent.clip = clip_of(&agent.class);
                }
            }
        }

        // Movement is decided on the state at the start of the tick and
        // applied simultaneously.
        let mut moves = [None, None];
        #[allow(clippy::needless_range_loop)]
        for slot in 0..2 {
            if !self.agents[slot].alive {
                continue;
            }
            let (goal, seeking_health) = self.goal_for(slot, t);
            let hold = !seeking_health && self.engaged(slot);
            let agent = &mut self.agents[slot];
            if hold || agent.pos == goal {
                agent.progress = 0.0;
                continue;
            }
            agent.progress += agent.class.speed / tps;
            if agent.progress >= 1.0 {
                agent.progress -= 1.0;
                let from = agent.pos;
                moves[slot] = self.next_tile(from, goal);
            }
        }
        for (slot, step) in moves.into_iter().enumerate() {
            if let Some(to) = step {
                self.agents[slot].pos = to;
            }
        }

        let first = if self.rng.gen::<bool>() { 0 } else { 1 };
        for slot in [first, 1 - first] {
            if self.agents[slot].alive {
                self.pick_up(slot, t);
            }
        }

        let dealt = [self.fire(0, t), self.fire(1, t)];
        let mut victims = Vec::with_capacity(2);
        for slot in 0..2 {
            let incoming = dealt[1 - slot];
            if incoming <= 0.0 {
                continue;
            }
            let agent = &mut self.agents[slot];
            let absorbed = incoming.min(agent.armor);
            agent.armor -= absorbed;
            agent.hp -= incoming - absorbed;
            if agent.hp <= 0.0 {
                victims.push(slot);
            }
        }
        if victims.len() == 2 && self.rng.gen::<bool>() {
            victims.swap(0, 1);
        }
        let respawn_ticks = (self.config.respawn_delay * tps).round() as u64;
        for slot in victims {
            let agent = &mut self.agents[slot];
            agent.alive = false;
            agent.respawn_tick = self.tick + respawn_ticks;
            if self.events.len() < self.config.kill_limit {
                self.events.push(KillEvent {
                    time: t,
                    victim: if slot == 0 { Player::One } else { Player::Two },
                    location: agent.pos,
                });
            }
        }

        if self.events.len() >= self.config.kill_limit {
            self.ended_at = Some(t);
        } else if t >= self.config.time_limit - 1e-9 {
            self.ended_at = Some(self.config.time_limit);
        }
        self.ended_at.is_none()
    }

    pub fn run(mut self) -> GameplayTrace {
        while self.step() {}
        self.into_trace()
    }

    fn into_trace(self) -> GameplayTrace {
        GameplayTrace {
            seed: self.seed,
            class1: self.classes.class1,
            class2: self.classes.class2,
            level_hash: self.level.content_hash(),
            ended_at: self.ended_at.unwrap_or_else(|| self.time()),
            events: self.events,
        }
    }
}

pub fn simulate_match(
    level: &Level,
    c1: &CharacterClass,
    c2: &CharacterClass,
    seed: u64,
) -> Result<GameplayTrace, SimError> {
    simulate_match_with(level, c1, c2, seed, SimConfig::default())
}

pub fn simulate_match_with(
    level: &Level,
    c1: &CharacterClass,
    c2: &CharacterClass,
    seed: u64,
    config: SimConfig,
) -> Result<GameplayTrace, SimError> {
    Ok(Match::new(level, c1, c2, seed, config)?.run())
}

/// Seconds an uncontested agent of `class` needs to walk from `from` to `to`
/// under the simulator's movement rules. `None` when unreachable.
pub fn travel_time(level: &Level, class: &CharacterClass, from: Coord, to: Coord, config: &SimConfig) -> Option<f64> {
    let steps = level.distances_to(to)[from.index()];
    if steps == UNREACHABLE {
        return None;
    }
    let tps = f64::from(config.ticks_per_second);
    let (mut progress, mut left, mut ticks) = (0.0, steps, 0u64);
    while left > 0 {
        ticks += 1;
        progress += class.speed / tps;
        if progress >= 1.0 {
            progress -= 1.0;
            left -= 1;
        }
    }
    Some(ticks as f64 / tps)
}
