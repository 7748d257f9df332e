//! Surrogate gameplay models: input encoding, the convolutional regression
//! network, training, evaluation, persistence and combined inference.

mod eval;
mod gemm;
mod io;
pub mod layers;
mod network;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{denormalize_params, CharacterClass, ClassError, CLASS_PARAMS};
use crate::corpus::CorpusRecord;
use crate::level::{Level, PowerupKind, TileKind, ValidationReport, CELLS, TILES};
use crate::metrics::{GameplayMetrics, WINDOWS};

pub use eval::{evaluate_mean_baseline, evaluate_model, evaluate_predictions, EvalReport};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use network::{Cache, SurrogateModel};
pub use train::{train_model, EpochStats, TrainingCurve};

/// Binary input layers: four architecture kinds then three powerup kinds.
pub const INPUT_CHANNELS: usize = 7;
/// Longest match; duration targets are divided by this.
pub const MAX_DURATION: f64 = 600.0;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("model output dimension {found} does not match expected {expected}")]
    OutputDimMismatch { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch}")]
    DivergedTraining { epoch: usize },
    #[error("every output has zero variance in the evaluation set")]
    DegenerateOutput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no {0} model loaded")]
    ModelNotLoaded(Target),
    #[error("level is not playable ({} violations)", .0.violations.len())]
    UnplayableLevel(ValidationReport),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file format: {0}")]
    Format(#[from] serde_json::Error),
}

/// Which gameplay quantity a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    KillRatio,
    Duration,
    DeathHeatmap,
    DramaticArc,
    CombatPacing,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::KillRatio,
        Target::Duration,
        Target::DeathHeatmap,
        Target::DramaticArc,
        Target::CombatPacing,
    ];

    pub fn output_dim(self) -> usize {
        match self {
            Target::KillRatio | Target::Duration => 1,
            Target::DeathHeatmap => CELLS,
            Target::DramaticArc | Target::CombatPacing => WINDOWS,
        }
    }

    /// Short name used for files and command-line arguments.
    pub fn name(self) -> &'static str {
        match self {
            Target::KillRatio => "kr",
            Target::Duration => "duration",
            Target::DeathHeatmap => "dh",
            Target::DramaticArc => "da",
            Target::CombatPacing => "cp",
        }
    }

    /// Training targets in `[0, 1]`; duration is scaled by [`MAX_DURATION`].
    pub fn extract(self, m: &GameplayMetrics) -> Vec<f64> {
        match self {
            Target::KillRatio => vec![m.kill_ratio],
            Target::Duration => vec![m.duration / MAX_DURATION],
            Target::DeathHeatmap => m.dh.to_vec(),
            Target::DramaticArc => m.da.to_vec(),
            Target::CombatPacing => m.cp.to_vec(),
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Target::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SurrogateError::InvalidConfig(format!("unknown target {s:?}")))
    }
}

/// Network widths plus optimisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv1: usize,
    pub conv2: usize,
    pub level_width: usize,
    pub class_width: usize,
    pub fusion_width: usize,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    /// Epochs without train-loss improvement before the rate is halved.
    pub plateau_patience: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Widths `(C1, C2, L, W, H)` with default optimisation settings.
    pub fn with_widths(widths: (usize, usize, usize, usize, usize), output_dim: usize) -> Self {
        let (conv1, conv2, level_width, class_width, fusion_width) = widths;
        Self {
            conv1,
            conv2,
            level_width,
            class_width,
            fusion_width,
            output_dim,
            learning_rate: 0.01,
            dropout: 0.1,
            epochs: 50,
            batch_size: 64,
            momentum: 0.9,
            plateau_patience: 3,
            seed: 0,
        }
    }

    /// The published architecture for each target.
    pub fn preset(target: Target) -> Self {
        let widths = match target {
            Target::DramaticArc => (32, 64, 64, 32, 32),
            _ => (32, 64, 64, 16, 128),
        };
        Self::with_widths(widths, target.output_dim())
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let bad = |m: &str| Err(SurrogateError::InvalidConfig(m.to_string()));
        if [
            self.conv1,
            self.conv2,
            self.level_width,
            self.class_width,
            self.fusion_width,
        ]
        .contains(&0)
        {
            return bad("layer widths must be positive");
        }
        if ![1, WINDOWS, CELLS].contains(&self.output_dim) {
            return bad("output_dim must be 1, 5 or 16");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size < 2 {
            return bad("batch size must be at least 2");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One encoded example: 7 binary 20×20 layers and both normalized class vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// Channel-major `[channel][row][col]`.
    pub layers: Vec<u8>,
    pub classes: [f64; 2 * CLASS_PARAMS],
}

impl ModelInput {
    pub fn layer(&self, channel: usize) -> &[u8] {
        &self.layers[channel * TILES..(channel + 1) * TILES]
    }
}

fn channel_of_tile(kind: TileKind) -> usize {
    match kind {
        TileKind::Ground => 0,
        TileKind::FirstFloor => 1,
        TileKind::Wall => 2,
        TileKind::Stairs => 3,
    }
}

fn channel_of_powerup(kind: PowerupKind) -> usize {
    4 + kind.index()
}

pub fn encode_input(level: &Level, c1: &CharacterClass, c2: &CharacterClass) -> Result<ModelInput, SurrogateError> {
    let mut classes = [0.0; 2 * CLASS_PARAMS];
    classes[..CLASS_PARAMS].copy_from_slice(&c1.normalized()?);
    classes[CLASS_PARAMS..].copy_from_slice(&c2.normalized()?);
    let mut layers = vec![0u8; INPUT_CHANNELS * TILES];
    for (i, kind) in level.tiles().iter().enumerate() {
        layers[channel_of_tile(*kind) * TILES + i] = 1;
    }
    for (i, p) in level.powerup_layer().iter().enumerate() {
        if let Some(p) = p {
            layers[channel_of_powerup(*p) * TILES + i] = 1;
        }
    }
    Ok(ModelInput { layers, classes })
}

/// Encodes a corpus record from its stored normalized class vectors.
pub fn encode_record(record: &CorpusRecord) -> Result<ModelInput, SurrogateError> {
    let a = CharacterClass::from_params(record.class1, denormalize_params(&record.class1_params));
    let b = CharacterClass::from_params(record.class2, denormalize_params(&record.class2_params));
    let mut input = encode_input(&record.level, &a, &b)?;
    input.classes[..CLASS_PARAMS].copy_from_slice(&record.class1_params);
    input.classes[CLASS_PARAMS..].copy_from_slice(&record.class2_params);
    Ok(input)
}

/// Encoded inputs with aligned target rows.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub inputs: Vec<ModelInput>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn from_records(records: &[CorpusRecord], target: Target) -> Result<Self, SurrogateError> {
        let mut inputs = Vec::with_capacity(records.len());
        let mut targets = Vec::with_capacity(records.len());
        for r in records {
            inputs.push(encode_record(r)?);
            targets.push(target.extract(&r.metrics));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let inputs: Vec<&ModelInput> = indices.iter().map(|&i| &self.inputs[i]).collect();
        let targets: Vec<&[f64]> = indices.iter().map(|&i| self.targets[i].as_slice()).collect();
        Batch::with_targets(&inputs, &targets)
    }
}

/// Feature-major tensors for a batch of examples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    /// `[channel, example, tile]`.
    pub level: Vec<f64>,
    /// `[feature, example]`.
    pub classes: Vec<f64>,
    /// `[output, example]`; empty for inference batches.
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn from_inputs(inputs: &[&ModelInput]) -> Self {
        let b = inputs.len();
        let mut level = vec![0.0; INPUT_CHANNELS * b * TILES];
        let mut classes = vec![0.0; 2 * CLASS_PARAMS * b];
        for (bi, input) in inputs.iter().enumerate() {
            for ch in 0..INPUT_CHANNELS {
                let dst = &mut level[(ch * b + bi) * TILES..(ch * b + bi + 1) * TILES];
                for (d, &s) in dst.iter_mut().zip(input.layer(ch)) {
                    *d = f64::from(s);
                }
            }
            for (f, &v) in input.classes.iter().enumerate() {
                classes[f * b + bi] = v;
            }
        }
        Self {
            size: b,
            level,
            classes,
            targets: Vec::new(),
        }
    }

    pub fn with_targets(inputs: &[&ModelInput], targets: &[&[f64]]) -> Self {
        let mut batch = Self::from_inputs(inputs);
        let b = inputs.len();
        let n = targets.first().map_or(0, |t| t.len());
        batch.targets = vec![0.0; n * b];
        for (bi, t) in targets.iter().enumerate() {
            for (o, &v) in t.iter().enumerate() {
                batch.targets[o * b + bi] = v;
            }
        }
        batch
    }
}

impl SurrogateModel {
    /// Batched inference; returns one output row per input.
    pub fn predict_inputs(&self, inputs: &[&ModelInput]) -> Vec<Vec<f64>> {
        if inputs.is_empty() {
            return Vec::new();
        }
        let b = inputs.len();
        let out = self.forward(&Batch::from_inputs(inputs));
        let n = self.output_dim();
        (0..b).map(|bi| (0..n).map(|o| out[o * b + bi]).collect()).collect()
    }
}

/// All five models; any may be absent.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    models: [Option<SurrogateModel>; 5],
}

impl ModelSet {
    fn slot(target: Target) -> usize {
        Target::ALL.iter().position(|&t| t == target).expect("listed target")
    }

    pub fn insert(&mut self, model: SurrogateModel) {
        let slot = Self::slot(model.target);
        self.models[slot] = Some(model);
    }

    pub fn get(&self, target: Target) -> Option<&SurrogateModel> {
        self.models[Self::slot(target)].as_ref()
    }

    pub fn require(&self, target: Target) -> Result<&SurrogateModel, SurrogateError> {
        self.get(target).ok_or(SurrogateError::ModelNotLoaded(target))
    }

    pub fn is_complete(&self) -> bool {
        self.models.iter().all(Option::is_some)
    }

    /// Loads `<name>.json` for every target present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, SurrogateError> {
        let mut set = Self::default();
        for target in Target::ALL {
            let path = dir.join(format!("{}.json", target.name()));
            if path.exists() {
                set.insert(load_model(&path, Some(target))?);
            }
        }
        Ok(set)
    }
}

/// Predicted gameplay of one level and matchup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub kr: f64,
    pub duration_s: f64,
    pub dh: [f64; CELLS],
    pub da: [f64; WINDOWS],
    pub cp: [f64; WINDOWS],
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn clamped<const N: usize>(raw: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    for (o, &v) in out.iter_mut().zip(raw) {
        *o = clamp01(v);
    }
    out
}

/// Runs all five models. Unplayable levels yield their validation report instead.
pub fn predict(
    models: &ModelSet,
    level: &Level,
    c1: &CharacterClass,
    c2: &CharacterClass,
) -> Result<PredictionSet, SurrogateError> {
    let report = level.validate();
    if !report.playable {
        return Err(SurrogateError::UnplayableLevel(report));
    }
    let kr_model = models.require(Target::KillRatio)?;
    let dur_model = models.require(Target::Duration)?;
    let dh_model = models.require(Target::DeathHeatmap)?;
    let da_model = models.require(Target::DramaticArc)?;
    let cp_model = models.require(Target::CombatPacing)?;
    let input = encode_input(level, c1, c2)?;
    let run = |m: &SurrogateModel| m.predict_inputs(&[&input]).pop().expect("one row");

    let mut dh: [f64; CELLS] = clamped(&run(dh_model));
    let total: f64 = dh.iter().sum();
    if total > 0.0 {
        dh.iter_mut().for_each(|v| *v /= total);
    } else {
        dh = [1.0 / CELLS as f64; CELLS];
    }
    Ok(PredictionSet {
        kr: clamp01(run(kr_model)[0]),
        duration_s: clamp01(run(dur_model)[0]) * MAX_DURATION,
        dh,
        da: clamped(&run(da_model)),
        cp: clamped(&run(cp_model)),
    })
}
