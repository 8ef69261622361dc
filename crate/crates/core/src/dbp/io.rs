//! Versioned model files. Floats are written in shortest round-trip form so
//! a save/load cycle reproduces every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dbp::model::LEssfmModel;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "lessfm-model";
pub const MODEL_VERSION: u32 = 1;

const CONVENTIONS: &str = "fft=unnormalized-forward,inverse-1/N;time=exp(+j2pi f t);\
gvd=exp(-j2pi^2 beta2 f^2 L) backward;nlpr=exp(+j theta),theta=h*I;\
units=km,ps2/km,rad/W,Hz";

/// Digest of the numeric conventions a model's parameters depend on.
pub fn model_conventions_hash() -> String {
    hex::encode(&Sha256::digest(CONVENTIONS.as_bytes())[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    conventions_hash: String,
    model: LEssfmModel,
}

pub fn model_to_string(model: &LEssfmModel) -> Result<String> {
    model.validate()?;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        conventions_hash: model_conventions_hash(),
        model: model.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_str(text: &str) -> Result<LEssfmModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format(format!("not a model file (format {:?})", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", file.version)));
    }
    if file.conventions_hash != model_conventions_hash() {
        return Err(Error::Format(format!(
            "model written under conventions {}, this build uses {}",
            file.conventions_hash,
            model_conventions_hash()
        )));
    }
    file.model.validate()?;
    Ok(file.model)
}

pub fn save_model(model: &LEssfmModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LEssfmModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}
