//! Latent-space adversarial transfer: generator, discriminator, losses,
//! training schedule and inference.

pub mod infer;
pub mod model;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_json, save_json, CHECKPOINT_VERSION};
use crate::error::TransferError;
use crate::guidedvae::VAEModel;

pub use infer::{
    random_pairing_baseline, results_to_csv, select_candidate, Candidate, ModelBundle,
    TransferResult, Transferer,
};
pub use model::{
    adversarial_fake_term, adversarial_style_term, cycle_loss, gradient_penalty,
    half_squared_error, real_score_input_gradient, recon_loss, style_loss, TransferConfig,
    TransferNets, DISC_STORE_TAG, FAKE_CLASS, GEN_STORE_TAG, N_CLASSES, SOURCE_CLASS, TARGET_CLASS,
};
pub use train::{train, IterationLog, TrainOptions, TrainReport, TransferModel};

pub const TRANSFER_FORMAT: &str = "molxfer-transfer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCheckpoint {
    pub format: String,
    pub version: u32,
    pub model: TransferModel,
}

impl TransferCheckpoint {
    pub fn new(model: TransferModel) -> Self {
        TransferCheckpoint {
            format: TRANSFER_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), TransferError> {
        save_json(path, self).map_err(|e| TransferError::Io(e.to_string()))
    }

    /// Loads a checkpoint and checks that it was trained against `vae`.
    pub fn load(path: &Path, vae: &VAEModel) -> Result<Self, TransferError> {
        let ckpt: TransferCheckpoint =
            load_json(path).map_err(|e| TransferError::Io(format!("{}: {e}", path.display())))?;
        if ckpt.format != TRANSFER_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(TransferError::Io(format!(
                "{}: unsupported checkpoint {} v{}",
                path.display(),
                ckpt.format,
                ckpt.version
            )));
        }
        if ckpt.model.vae_hash != vae.store.content_hash() {
            return Err(TransferError::VaeHashMismatch);
        }
        Ok(ckpt)
    }
}
