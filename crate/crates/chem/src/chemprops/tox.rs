//! Logistic-regression toxicity surrogate over circular fingerprint bits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chemprops::fingerprint::{circular_fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
use crate::error::PropertyError;
use crate::graph::MolGraph;
use crate::smiles::write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToxConfig {
    pub radius: usize,
    pub width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for ToxConfig {
    fn default() -> Self {
        ToxConfig {
            radius: DEFAULT_RADIUS,
            width: DEFAULT_WIDTH,
            epochs: 400,
            learning_rate: 1.0,
            l2: 1e-4,
            holdout_fraction: 0.2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxMetadata {
    /// SHA-256 over the written SMILES and labels of the training corpus.
    pub corpus_hash: String,
    pub holdout_auroc: f64,
    pub n_train: usize,
    pub n_holdout: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub radius: usize,
    pub width: usize,
    pub metadata: ToxMetadata,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ToxModel {
    pub fn zero(radius: usize, width: usize) -> Self {
        ToxModel {
            weights: vec![0.0; width],
            bias: 0.0,
            radius,
            width,
            metadata: ToxMetadata {
                corpus_hash: String::new(),
                holdout_auroc: 0.5,
                n_train: 0,
                n_holdout: 0,
                seed: 0,
            },
        }
    }

    fn features(&self, graph: &MolGraph) -> Vec<usize> {
        circular_fingerprint(graph, self.radius, self.width)
            .ones()
            .collect()
    }

    fn score_bits(&self, bits: &[usize]) -> f64 {
        self.bias + bits.iter().map(|&b| self.weights[b]).sum::<f64>()
    }

    /// Probability of the toxic class.
    pub fn predict(&self, graph: &MolGraph) -> f64 {
        sigmoid(self.score_bits(&self.features(graph)))
    }
}

pub fn corpus_hash(corpus: &[(MolGraph, bool)]) -> String {
    let mut h = Sha256::new();
    for (g, label) in corpus {
        h.update(write(g).as_bytes());
        h.update(if *label { b"\t1\n" } else { b"\t0\n" });
    }
    hex::encode(h.finalize())
}

/// Stratified split: the same fraction of each class goes to the holdout set.
fn split_indices(labels: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_hold = ((idx.len() as f64) * fraction).round() as usize;
        holdout.extend_from_slice(&idx[..n_hold]);
        train.extend_from_slice(&idx[n_hold..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    (train, holdout)
}

/// Full-batch gradient descent on the L2-regularized logistic loss.
pub fn train_tox_predictor(
    corpus: &[(MolGraph, bool)],
    config: &ToxConfig,
) -> Result<ToxModel, PropertyError> {
    if corpus.is_empty() {
        return Err(PropertyError::EmptyCorpus);
    }
    let labels: Vec<bool> = corpus.iter().map(|(_, l)| *l).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(PropertyError::DegenerateLabels);
    }
    let mut model = ToxModel::zero(config.radius, config.width);
    let features: Vec<Vec<usize>> = corpus.iter().map(|(g, _)| model.features(g)).collect();
    let (train, holdout) = split_indices(&labels, config.holdout_fraction, config.seed);
    let n = train.len() as f64;
    let mut grad = vec![0.0; config.width];
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        for &i in &train {
            let p = sigmoid(model.score_bits(&features[i]));
            let err = p - if labels[i] { 1.0 } else { 0.0 };
            grad_bias += err;
            for &b in &features[i] {
                grad[b] += err;
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g / n + config.l2 * *w);
        }
        model.bias -= config.learning_rate * grad_bias / n;
    }
    let scores: Vec<f64> = holdout
        .iter()
        .map(|&i| model.score_bits(&features[i]))
        .collect();
    let hold_labels: Vec<bool> = holdout.iter().map(|&i| labels[i]).collect();
    model.metadata = ToxMetadata {
        corpus_hash: corpus_hash(corpus),
        holdout_auroc: auroc(&scores, &hold_labels),
        n_train: train.len(),
        n_holdout: holdout.len(),
        seed: config.seed,
    };
    Ok(model)
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count half.
/// Returns 0.5 when either class is absent.
pub fn auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}
