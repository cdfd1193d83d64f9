//! Joint optimization of the reconstruction, KL, excitation and inhibition terms.

use std::path::PathBuf;

use log::info;
use molxfer_chem::smiles::parse_valid;
use molxfer_nn::ndarray::Array2;
use molxfer_nn::{Adam, AdamConfig, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{save_json, VaeCheckpoint};
use crate::error::VaeError;
use crate::guidedvae::attributes::{attributes_of, fit_specs, normalize_row, N_ATTRIBUTES};
use crate::guidedvae::model::{standard_normal, VAEConfig, VAEModel};
use crate::guidedvae::vocab::Vocabulary;

#[derive(Debug, Clone, Default)]
pub struct PretrainOptions {
    /// Directory receiving one checkpoint per epoch.
    pub checkpoint_dir: Option<PathBuf>,
    /// CSV file receiving one row per optimizer step.
    pub log_path: Option<PathBuf>,
    /// Vocabulary to use instead of one built from the training corpus.
    pub vocab: Option<Vocabulary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub kl_weight: f64,
    pub recon: f64,
    pub kl: f64,
    pub elbo: f64,
    pub excitation: f64,
    pub inhibition: f64,
    /// `elbo + excitation - inhibition`, the minimized form of the joint objective.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub steps: Vec<StepLog>,
    pub epochs_completed: usize,
    pub n_molecules: usize,
}

impl PretrainReport {
    /// Mean of `total` per epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        (0..self.epochs_completed)
            .map(|e| {
                let xs: Vec<f64> = self
                    .steps
                    .iter()
                    .filter(|s| s.epoch == e)
                    .map(|s| s.total)
                    .collect();
                xs.iter().sum::<f64>() / xs.len().max(1) as f64
            })
            .collect()
    }
}

/// Coefficient of determination of `pred` against `truth`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}

fn kl_weight_at(config: &VAEConfig, step: usize, total_steps: usize) -> f64 {
    let warm = (config.kl_warmup_fraction * total_steps as f64).ceil();
    if warm <= 0.0 {
        config.kl_weight
    } else {
        config.kl_weight * (step as f64 / warm).min(1.0)
    }
}

/// Normalized attribute rows for a set of SMILES.
pub fn attribute_labels<S: AsRef<str>>(
    model: &VAEModel,
    smiles: &[S],
) -> Result<Array2<f64>, VaeError> {
    let mut out = Array2::zeros((smiles.len(), N_ATTRIBUTES));
    for (i, s) in smiles.iter().enumerate() {
        let g = parse_valid(s.as_ref())
            .ok_or_else(|| VaeError::InvalidMolecule(s.as_ref().to_string()))?;
        let row = normalize_row(&model.attributes, &attributes_of(&g)?);
        for t in 0..N_ATTRIBUTES {
            out[[i, t]] = row[t];
        }
    }
    Ok(out)
}

fn write_log(path: &PathBuf, steps: &[StepLog]) -> Result<(), VaeError> {
    let io = |e: csv::Error| VaeError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for s in steps {
        w.serialize(s).map_err(io)?;
    }
    w.flush().map_err(|e| VaeError::Io(e.to_string()))
}

/// Trains a guided VAE on valid SMILES and returns it frozen.
pub fn pretrain<S: AsRef<str>>(
    corpus: &[S],
    config: &VAEConfig,
    options: &PretrainOptions,
) -> Result<(VAEModel, PretrainReport), VaeError> {
    if corpus.is_empty() {
        return Err(VaeError::EmptyCorpus);
    }
    config.validate()?;
    let mut raw = Vec::with_capacity(corpus.len());
    for s in corpus {
        let g = parse_valid(s.as_ref())
            .ok_or_else(|| VaeError::InvalidMolecule(s.as_ref().to_string()))?;
        raw.push(attributes_of(&g)?);
    }
    let vocab = match &options.vocab {
        Some(v) => v.clone(),
        None => Vocabulary::build(corpus)?,
    };
    let specs = fit_specs(&raw)?;
    let mut model = VAEModel::new(*config, vocab, specs)?;
    let seqs = model.tokenize_all(corpus)?;
    let labels: Vec<[f64; N_ATTRIBUTES]> = raw
        .iter()
        .map(|r| normalize_row(&model.attributes, r))
        .collect();

    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &model.store,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let batches_per_epoch = corpus.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut steps = Vec::with_capacity(total_steps);
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| VaeError::Io(e.to_string()))?;
    }
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let step = steps.len();
            let batch: Vec<Vec<usize>> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            let y =
                Array2::from_shape_fn((chunk.len(), N_ATTRIBUTES), |(r, t)| labels[chunk[r]][t]);
            let eps = standard_normal(chunk.len(), config.latent_dim, &mut rng);
            let kl_weight = kl_weight_at(config, step, total_steps);
            let mut g = Graph::new();
            let terms = model.loss_terms(&mut g, &batch, &y, &eps, kl_weight);
            let log = StepLog {
                epoch,
                step,
                kl_weight,
                recon: g.scalar(terms.recon),
                kl: g.scalar(terms.kl),
                elbo: g.scalar(terms.elbo),
                excitation: g.scalar(terms.excitation),
                inhibition: g.scalar(terms.inhibition),
                total: g.scalar(terms.elbo) + g.scalar(terms.excitation)
                    - g.scalar(terms.inhibition),
            };
            if !g.scalar(terms.objective).is_finite() {
                return Err(VaeError::NonFiniteLoss { epoch, step });
            }
            let grads = g.backward(terms.objective);
            let grads = grads.for_store(&model.store);
            adam.step(&mut model.store, grads)?;
            if !model.store.all_finite() {
                return Err(VaeError::NonFiniteLoss { epoch, step });
            }
            steps.push(log);
        }
        let recent = &steps[steps.len() - batches_per_epoch..];
        let mean = |f: fn(&StepLog) -> f64| recent.iter().map(f).sum::<f64>() / recent.len() as f64;
        info!(
            "epoch {epoch}: recon {:.4} kl {:.4} excitation {:.4} inhibition {:.4}",
            mean(|s| s.recon),
            mean(|s| s.kl),
            mean(|s| s.excitation),
            mean(|s| s.inhibition)
        );
        if let Some(dir) = &options.checkpoint_dir {
            let ckpt = VaeCheckpoint::new(model.clone(), epoch + 1);
            save_json(&dir.join(format!("vae_epoch{:03}.json", epoch + 1)), &ckpt)
                .map_err(|e| VaeError::Io(e.to_string()))?;
        }
        if let Some(path) = &options.log_path {
            write_log(path, &steps)?;
        }
    }
    model.freeze();
    let report = PretrainReport {
        steps,
        epochs_completed: config.epochs,
        n_molecules: corpus.len(),
    };
    Ok((model, report))
}
