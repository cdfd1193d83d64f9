//! Desk-scale scorers and style-pool corpora built from generated molecules.

use log::info;
use molxfer_chem::chemprops::{
    bundled_alerts, reference_smiles, train_tox_predictor, FragmentFreqTable, ToxConfig,
};
use molxfer_chem::smiles::parse_valid;
use molxfer_chem::MolGraph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::corpus::{score_record, CorpusMetadata, LabeledCorpus, Scorers};
use crate::data::generator::{make_desk_corpus, GeneratorConfig, UniqueMolecules};
use crate::error::DataError;
use crate::metrics::{PoolLabel, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeskTaskConfig {
    /// Molecules per style pool.
    pub per_pool: usize,
    pub generator: GeneratorConfig,
    /// Generated molecules added to the bundled reference set for SA fragment statistics.
    pub sa_reference_generated: usize,
    pub sa_reference_seed: u64,
    /// Alert-labeled generated molecules for the toxicity surrogate.
    pub tox_training_size: usize,
    pub tox_seed: u64,
    /// Upper bound on distinct molecules drawn while filling the pools.
    pub max_draws: usize,
}

impl Default for DeskTaskConfig {
    fn default() -> Self {
        DeskTaskConfig {
            per_pool: 5000,
            generator: GeneratorConfig {
                seed: 11,
                ..GeneratorConfig::default()
            },
            sa_reference_generated: 4500,
            sa_reference_seed: 7,
            tox_training_size: 4000,
            tox_seed: 13,
            max_draws: 600_000,
        }
    }
}

fn graphs(smiles: &[String]) -> Vec<MolGraph> {
    smiles.iter().filter_map(|s| parse_valid(s)).collect()
}

/// SA fragment table over the bundled reference molecules plus a seeded generated set.
pub fn build_sa_table(config: &DeskTaskConfig) -> Result<FragmentFreqTable, DataError> {
    let mut reference: Vec<MolGraph> = reference_smiles()
        .into_iter()
        .filter_map(parse_valid)
        .collect();
    let gen = GeneratorConfig {
        seed: config.sa_reference_seed,
        ..config.generator
    };
    reference.extend(graphs(&make_desk_corpus(
        &gen,
        config.sa_reference_generated,
    )));
    Ok(FragmentFreqTable::build(&reference)?)
}

/// Toxicity surrogate trained on generated molecules labeled toxic when
/// they carry a bundled structural alert.
pub fn build_tox_model(
    config: &DeskTaskConfig,
) -> Result<molxfer_chem::chemprops::ToxModel, DataError> {
    let gen = GeneratorConfig {
        seed: config.tox_seed,
        complexity_min: 0.5,
        ..config.generator
    };
    let alerts = bundled_alerts();
    let corpus: Vec<(MolGraph, bool)> = graphs(&make_desk_corpus(&gen, config.tox_training_size))
        .into_iter()
        .map(|g| {
            let toxic = alerts.iter().any(|a| a.matches(&g));
            (g, toxic)
        })
        .collect();
    let model = train_tox_predictor(
        &corpus,
        &ToxConfig {
            seed: config.tox_seed,
            ..ToxConfig::default()
        },
    )?;
    info!(
        "toxicity surrogate: {} positives of {}, holdout AUROC {:.3}",
        corpus.iter().filter(|(_, t)| *t).count(),
        corpus.len(),
        model.metadata.holdout_auroc
    );
    Ok(model)
}

pub fn build_scorers(config: &DeskTaskConfig) -> Result<Scorers, DataError> {
    Ok(Scorers {
        tox: build_tox_model(config)?,
        sa: build_sa_table(config)?,
    })
}

/// Draws distinct generated molecules until both style pools hold
/// `per_pool` members; molecules outside both pools are discarded.
pub fn build_task_corpus(
    task: &TaskSpec,
    scorers: &Scorers,
    config: &DeskTaskConfig,
) -> Result<LabeledCorpus, DataError> {
    let mut source = Vec::new();
    let mut target = Vec::new();
    let mut hasher = Sha256::new();
    let mut draws = UniqueMolecules::new(&config.generator);
    let mut n = 0;
    while source.len() < config.per_pool || target.len() < config.per_pool {
        if n >= config.max_draws {
            let (needed, available) = if source.len() < config.per_pool {
                (config.per_pool, source.len())
            } else {
                (config.per_pool, target.len())
            };
            return Err(DataError::PoolTooSmall { needed, available });
        }
        let Some(smiles) = draws.next() else {
            return Err(DataError::PoolTooSmall {
                needed: config.per_pool,
                available: source.len().min(target.len()),
            });
        };
        n += 1;
        hasher.update(smiles.as_bytes());
        hasher.update(b"\n");
        let Ok(record) = score_record(&smiles, task, scorers) else {
            continue;
        };
        match record.pool {
            PoolLabel::Source if source.len() < config.per_pool => source.push(record),
            PoolLabel::Target if target.len() < config.per_pool => target.push(record),
            _ => {}
        }
    }
    info!(
        "filled both pools of {} after {n} distinct draws",
        config.per_pool
    );
    let mut records = source;
    records.extend(target);
    Ok(LabeledCorpus {
        metadata: CorpusMetadata {
            task: *task,
            input_hash: hex::encode(hasher.finalize()),
            scorers: scorers.versions(),
            seed: config.generator.seed,
            n_records: records.len(),
            n_invalid: 0,
        },
        records,
    })
}
