//! k-decode inference and evaluation over a test set.

use molxfer_chem::chemprops::{bundled_alerts, content_properties, PropertyVector};
use molxfer_chem::smiles::parse_valid;
use molxfer_nn::ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::sample_style_instances;
use crate::error::{MetricsError, TransferError};
use crate::guidedvae::{DecodeMode, VAEModel};
use crate::metrics::{improvement, MetricsReport, PairRecord, PssScales, StyleScorer, TaskSpec};
use crate::styleflow::batch_prior;
use crate::transfer::train::TransferModel;

/// Everything needed to transfer and score molecules.
#[derive(Debug, Clone)]
pub struct ModelBundle<'a> {
    pub vae: &'a VAEModel,
    pub model: &'a TransferModel,
    pub task: TaskSpec,
    pub scorer: &'a StyleScorer,
    pub scales: &'a PssScales,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub smiles: String,
    pub valid: bool,
    pub prop: Option<f64>,
    pub pss: Option<f64>,
    pub imp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub input: String,
    pub prop_before: f64,
    pub candidates: Vec<Candidate>,
    /// Index of the returned candidate.
    pub best: usize,
    /// Whether the returned candidate passed the PSS floor.
    pub successful: bool,
}

impl TransferResult {
    pub fn output(&self) -> &Candidate {
        &self.candidates[self.best]
    }
}

/// Index of the highest improvement among candidates accepted by `keep`;
/// ties go to the lowest index.
fn argmax_imp(candidates: &[Candidate], keep: impl Fn(&Candidate) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let (true, Some(imp)) = (keep(c), c.imp) {
            if best.is_none_or(|(_, b)| imp > b) {
                best = Some((i, imp));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Picks the returned candidate: the best valid one above the PSS floor, or
/// else the best valid one, or else the first, flagged unsuccessful.
pub fn select_candidate(candidates: &[Candidate], pss_floor: f64) -> (usize, bool) {
    if let Some(i) = argmax_imp(candidates, |c| {
        c.valid && c.pss.is_some_and(|p| p > pss_floor)
    }) {
        return (i, true);
    }
    (argmax_imp(candidates, |c| c.valid).unwrap_or(0), false)
}

/// Inference over one model bundle with cached target-pool latents.
pub struct Transferer<'a> {
    pub bundle: ModelBundle<'a>,
    target_latents: Array2<f64>,
}

impl<'a> Transferer<'a> {
    pub fn new(bundle: ModelBundle<'a>) -> Result<Self, TransferError> {
        if bundle.model.vae_hash != bundle.vae.store.content_hash() {
            return Err(TransferError::VaeHashMismatch);
        }
        if bundle.model.target_pool.is_empty() {
            return Err(TransferError::EmptyPool("target"));
        }
        let target_latents = bundle.vae.encode_means(&bundle.model.target_pool)?;
        Ok(Transferer {
            bundle,
            target_latents,
        })
    }

    fn score_candidate(&self, smiles: String, px: &PropertyVector, prop_x: f64) -> Candidate {
        let scored = parse_valid(&smiles).and_then(|g| {
            let prop = self.bundle.scorer.score(&g).ok()?;
            let py = content_properties(&g).ok()?;
            Some((prop, self.bundle.scales.pss(px, &py)))
        });
        match scored {
            Some((prop, pss)) => Candidate {
                smiles,
                valid: true,
                prop: Some(prop),
                pss: Some(pss),
                imp: Some(improvement(prop_x, prop, &self.bundle.task)),
            },
            None => Candidate {
                smiles,
                valid: false,
                prop: None,
                pss: None,
                imp: None,
            },
        }
    }

    /// Decodes `k` candidates for `molecule`, each from a fresh style-instance
    /// batch and flow draw, and selects one.
    pub fn transfer(
        &self,
        molecule: &str,
        k: usize,
        pss_floor: f64,
        seed: u64,
    ) -> Result<TransferResult, TransferError> {
        let invalid = || TransferError::InvalidInput(molecule.to_string());
        let gx = parse_valid(molecule).ok_or_else(invalid)?;
        let prop_x = self.bundle.scorer.score(&gx).map_err(|_| invalid())?;
        let px = content_properties(&gx).map_err(|_| invalid())?;
        let z_c = self
            .bundle
            .vae
            .encode_means(&[molecule])
            .map_err(|_| invalid())?;
        let model = self.bundle.model;
        let pool = &model.target_pool;
        let exclude: Vec<usize> = pool
            .iter()
            .position(|s| s == molecule)
            .into_iter()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.bundle.vae.latent_dim();
        let mut h_s = Array2::zeros((k, d));
        for row in 0..k {
            let idx =
                sample_style_instances(pool.len(), model.config.k_instances, &exclude, &mut rng)?;
            let prior = batch_prior(&self.target_latents.select(Axis(0), &idx))?;
            let code =
                model
                    .nets
                    .flow
                    .sample_from_prior(&model.nets.gen_store, &prior, 1, &mut rng);
            h_s.row_mut(row).assign(&code.h_s.row(0));
        }
        let zc_rep = z_c.broadcast((k, d)).expect("one row").to_owned();
        let z_g = model.nets.generate(&zc_rep, &h_s)?;
        let decoded = self
            .bundle
            .vae
            .decode_smiles(&z_g, DecodeMode::Greedy, &mut rng);
        let candidates: Vec<Candidate> = decoded
            .into_iter()
            .map(|s| self.score_candidate(s, &px, prop_x))
            .collect();
        let (best, successful) = select_candidate(&candidates, pss_floor);
        Ok(TransferResult {
            input: molecule.to_string(),
            prop_before: prop_x,
            candidates,
            best,
            successful,
        })
    }

    /// Transfers every test molecule with a per-molecule seed derived from
    /// `seed` and scores the returned outputs.
    pub fn evaluate(
        &self,
        test: &[String],
        seed: u64,
    ) -> Result<(MetricsReport, Vec<TransferResult>), TransferError> {
        if test.is_empty() {
            return Err(MetricsError::EmptyTestSet.into());
        }
        let cfg = &self.bundle.model.config;
        let mut results = Vec::with_capacity(test.len());
        let mut records = Vec::with_capacity(test.len());
        for (i, m) in test.iter().enumerate() {
            let r = self.transfer(
                m,
                cfg.decode_count,
                cfg.pss_floor,
                seed.wrapping_add(i as u64),
            )?;
            records.push(PairRecord::score(
                m,
                &r.output().smiles,
                &self.bundle.task,
                self.bundle.scorer,
                self.bundle.scales,
            )?);
            results.push(r);
        }
        let report = MetricsReport::new(self.bundle.task, records, bundled_alerts())?;
        Ok((report, results))
    }
}

/// Pairs every test molecule with a seeded random member of `pool` and scores the pairs.
pub fn random_pairing_baseline(
    test: &[String],
    pool: &[String],
    task: &TaskSpec,
    scorer: &StyleScorer,
    scales: &PssScales,
    seed: u64,
) -> Result<MetricsReport, MetricsError> {
    if test.is_empty() || pool.is_empty() {
        return Err(MetricsError::EmptyTestSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = test
        .iter()
        .map(|m| {
            let partner = pool.choose(&mut rng).expect("non-empty pool");
            PairRecord::score(m, partner, task, scorer, scales)
        })
        .collect::<Result<Vec<_>, _>>()?;
    MetricsReport::new(*task, records, bundled_alerts())
}

/// One CSV row per input: input, output, property before and after, PSS,
/// success flag and candidate count.
pub fn results_to_csv(results: &[TransferResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "input",
        "output",
        "prop_before",
        "prop_after",
        "pss",
        "success",
        "candidates",
    ])
    .expect("in-memory write");
    let cell = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.6}"));
    for r in results {
        let c = r.output();
        w.write_record([
            r.input.clone(),
            c.smiles.clone(),
            format!("{:.6}", r.prop_before),
            cell(c.prop),
            cell(c.pss),
            r.successful.to_string(),
            r.candidates.len().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
