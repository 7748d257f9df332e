//! Character classes and their normalisation into network inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of scalar parameters describing a class.
pub const CLASS_PARAMS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassError {
    #[error("parameter {name} = {value} lies outside [{min}, {max}]")]
    OutOfRangeParameter {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown character class {0:?}")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassKind {
    Heavy,
    Scout,
    Sniper,
    Soldier,
    DemolitionMan,
}

impl ClassKind {
    /// Preset order; also the tie-break order of class suggestions.
    pub const ALL: [ClassKind; 5] = [
        ClassKind::Heavy,
        ClassKind::Scout,
        ClassKind::Sniper,
        ClassKind::Soldier,
        ClassKind::DemolitionMan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassKind::Heavy => "Heavy",
            ClassKind::Scout => "Scout",
            ClassKind::Sniper => "Sniper",
            ClassKind::Soldier => "Soldier",
            ClassKind::DemolitionMan => "DemolitionMan",
        }
    }

    pub fn preset(self) -> CharacterClass {
        let (hp, speed, damage, rof, clip, reload, accuracy, range) = match self {
            ClassKind::Heavy => (200.0, 2.5, 8.0, 10.0, 40.0, 4.0, 0.6, 8.0),
            ClassKind::Scout => (100.0, 5.0, 60.0, 1.0, 6.0, 2.0, 0.7, 4.0),
            ClassKind::Sniper => (110.0, 3.0, 120.0, 0.5, 4.0, 3.0, 0.95, 18.0),
            ClassKind::Soldier => (150.0, 3.0, 70.0, 0.8, 4.0, 2.5, 0.8, 14.0),
            ClassKind::DemolitionMan => (140.0, 2.8, 90.0, 0.7, 4.0, 3.0, 0.65, 10.0),
        };
        CharacterClass {
            kind: self,
            hit_points: hp,
            speed,
            weapon: Weapon {
                damage,
                rate_of_fire: rof,
                clip_size: clip,
                reload_time: reload,
                accuracy,
                range,
            },
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassKind {
    type Err = ClassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ClassError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weapon {
    /// HP per hit.
    pub damage: f64,
    /// Shots per second.
    pub rate_of_fire: f64,
    /// Shots per clip.
    pub clip_size: f64,
    /// Seconds.
    pub reload_time: f64,
    /// Hit probability at point-blank range.
    pub accuracy: f64,
    /// Tiles.
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterClass {
    pub kind: ClassKind,
    pub hit_points: f64,
    /// Tiles per second.
    pub speed: f64,
    pub weapon: Weapon,
}

/// Inclusive value range of one class parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

/// Normalisation ranges in parameter-vector order.
pub const PARAM_RANGES: [ParamRange; CLASS_PARAMS] = [
    ParamRange {
        name: "hit_points",
        min: 50.0,
        max: 250.0,
    },
    ParamRange {
        name: "speed",
        min: 1.0,
        max: 6.0,
    },
    ParamRange {
        name: "damage",
        min: 1.0,
        max: 150.0,
    },
    ParamRange {
        name: "rate_of_fire",
        min: 0.25,
        max: 12.0,
    },
    ParamRange {
        name: "clip_size",
        min: 1.0,
        max: 60.0,
    },
    ParamRange {
        name: "reload_time",
        min: 0.5,
        max: 6.0,
    },
    ParamRange {
        name: "accuracy",
        min: 0.0,
        max: 1.0,
    },
    ParamRange {
        name: "range",
        min: 1.0,
        max: 20.0,
    },
];

impl CharacterClass {
    /// Raw parameters: HP, speed, damage, rate of fire, clip, reload, accuracy, range.
    pub fn params(&self) -> [f64; CLASS_PARAMS] {
        let w = &self.weapon;
        [
            self.hit_points,
            self.speed,
            w.damage,
            w.rate_of_fire,
            w.clip_size,
            w.reload_time,
            w.accuracy,
            w.range,
        ]
    }

    pub fn from_params(kind: ClassKind, p: [f64; CLASS_PARAMS]) -> Self {
        CharacterClass {
            kind,
            hit_points: p[0],
            speed: p[1],
            weapon: Weapon {
                damage: p[2],
                rate_of_fire: p[3],
                clip_size: p[4],
                reload_time: p[5],
                accuracy: p[6],
                range: p[7],
            },
        }
    }

    pub fn normalized(&self) -> Result<[f64; CLASS_PARAMS], ClassError> {
        normalize_params(&self.params())
    }
}

pub fn normalize_params(p: &[f64; CLASS_PARAMS]) -> Result<[f64; CLASS_PARAMS], ClassError> {
    let mut out = [0.0; CLASS_PARAMS];
    for ((o, &value), r) in out.iter_mut().zip(p).zip(PARAM_RANGES.iter()) {
        if !(r.min..=r.max).contains(&value) {
            return Err(ClassError::OutOfRangeParameter {
                name: r.name,
                value,
                min: r.min,
                max: r.max,
            });
        }
        *o = (value - r.min) / (r.max - r.min);
    }
    Ok(out)
}

/// Inverse of [`normalize_params`].
pub fn denormalize_params(v: &[f64; CLASS_PARAMS]) -> [f64; CLASS_PARAMS] {
    let mut out = [0.0; CLASS_PARAMS];
    for ((o, &x), r) in out.iter_mut().zip(v).zip(PARAM_RANGES.iter()) {
        *o = r.min + x * (r.max - r.min);
    }
    out
}

pub fn preset_classes() -> [CharacterClass; 5] {
    ClassKind::ALL.map(ClassKind::preset)
}

/// An ordered matchup: player 1's class then player 2's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassPair {
    pub class1: ClassKind,
    pub class2: ClassKind,
}

impl ClassPair {
    pub const fn new(class1: ClassKind, class2: ClassKind) -> Self {
        Self { class1, class2 }
    }

    pub fn swapped(self) -> Self {
        Self::new(self.class2, self.class1)
    }

    pub fn is_same(self) -> bool {
        self.class1 == self.class2
    }

    /// Index into the 25 ordered pairs.
    pub fn index(self) -> usize {
        self.class1.index() * 5 + self.class2.index()
    }

    pub fn from_index(i: usize) -> Self {
        Self::new(ClassKind::ALL[i / 5], ClassKind::ALL[i % 5])
    }
}

impl Default for ClassPair {
    fn default() -> Self {
        Self::new(ClassKind::Heavy, ClassKind::Scout)
    }
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} vs {}", self.class1, self.class2)
    }
}
