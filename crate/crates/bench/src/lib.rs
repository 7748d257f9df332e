//! Shared fixtures for the benchmarks.

use susketch_core::corpus::{generate_random_level, GeneratorParams};
use susketch_core::surrogate::{ModelConfig, SurrogateModel, Target};
use susketch_core::Level;

pub fn levels(n: usize) -> Vec<Level> {
    (0..n as u64)
        .map(|s| generate_random_level(s, &GeneratorParams::default()).expect("default parameters are valid"))
        .collect()
}

/// Untrained network with the preset widths; inference cost does not depend on the weights.
pub fn preset_model(target: Target) -> SurrogateModel {
    SurrogateModel::new(ModelConfig::preset(target), target).expect("presets are valid")
}
