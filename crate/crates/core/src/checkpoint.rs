//! Versioned JSON checkpoints.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::VaeError;
use crate::guidedvae::{VAEModel, Vocabulary};

pub const VAE_FORMAT: &str = "molxfer-vae";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes through a temporary sibling file and renames it into place.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string(value).map_err(io::Error::other)?;
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeCheckpoint {
    pub format: String,
    pub version: u32,
    pub epochs: usize,
    pub model: VAEModel,
}

impl VaeCheckpoint {
    pub fn new(model: VAEModel, epochs: usize) -> Self {
        VaeCheckpoint {
            format: VAE_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            epochs,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), VaeError> {
        save_json(path, self).map_err(|e| VaeError::Io(e.to_string()))
    }

    /// Loads a checkpoint; `expected` vocabulary, when given, must match exactly.
    pub fn load(path: &Path, expected: Option<&Vocabulary>) -> Result<Self, VaeError> {
        let mut ckpt: VaeCheckpoint =
            load_json(path).map_err(|e| VaeError::Io(format!("{}: {e}", path.display())))?;
        if ckpt.format != VAE_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(VaeError::Io(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        ckpt.model.vocab.reindex();
        if let Some(v) = expected {
            if v.tokens() != ckpt.model.vocab.tokens() {
                return Err(VaeError::VocabularyMismatch);
            }
        }
        Ok(ckpt)
    }
}
