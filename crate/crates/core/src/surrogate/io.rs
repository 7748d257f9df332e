use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SurrogateError, SurrogateModel, Target};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: SurrogateModel,
}

pub fn model_to_json(model: &SurrogateModel) -> Result<String, SurrogateError> {
    Ok(serde_json::to_string(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    })?)
}

/// Parses a model file, checking its version, tensor sizes and (when given)
/// that it predicts `expected`.
pub fn model_from_json(text: &str, expected: Option<Target>) -> Result<SurrogateModel, SurrogateError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(SurrogateError::InvalidModel(format!(
            "format version {} (supported: {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let mut model = file.model;
    let found = model.config.output_dim;
    let wanted = expected.unwrap_or(model.target).output_dim();
    if found != wanted || found != model.target.output_dim() {
        return Err(SurrogateError::OutputDimMismatch {
            expected: wanted,
            found,
        });
    }
    if let Some(t) = expected.filter(|&t| t != model.target) {
        return Err(SurrogateError::InvalidModel(format!(
            "file holds a {} model, expected {t}",
            model.target
        )));
    }
    model.config.validate()?;
    model.check_shapes()?;
    Ok(model)
}

pub fn save_model(model: &SurrogateModel, path: &Path) -> Result<(), SurrogateError> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path, expected: Option<Target>) -> Result<SurrogateModel, SurrogateError> {
    model_from_json(&fs::read_to_string(path)?, expected)
}
