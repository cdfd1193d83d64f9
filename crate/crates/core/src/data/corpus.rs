//! Labeled corpora: ingestion, persistence, splits and style-instance sampling.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::warn;
use molxfer_chem::chemprops::{content_properties, FragmentFreqTable, PropertyVector, ToxModel};
use molxfer_chem::smiles::check;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;
use crate::metrics::{PoolLabel, TaskSpec};

pub const CORPUS_HEADER: [&str; 12] = [
    "smiles", "mw", "logp", "hba", "hbd", "rot", "rings", "charge", "tpsa", "tox", "sa", "pool",
];

/// Both style scorers; every corpus record carries both scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorers {
    pub tox: ToxModel,
    pub sa: FragmentFreqTable,
}

impl Scorers {
    pub fn style_score(&self, task: &TaskSpec, tox: f64, sa: f64) -> f64 {
        match task.kind {
            crate::metrics::TaskKind::Toxicity => tox,
            crate::metrics::TaskKind::Synthesizability => sa,
        }
    }

    /// Short identifiers of the scorer state recorded in corpus metadata.
    pub fn versions(&self) -> ScorerVersions {
        let (lo, hi) = self.sa.bounds();
        ScorerVersions {
            tox_corpus_hash: self.tox.metadata.corpus_hash.clone(),
            tox_seed: self.tox.metadata.seed,
            sa_reference_size: self.sa.n_molecules(),
            sa_bounds: [lo, hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerVersions {
    pub tox_corpus_hash: String,
    pub tox_seed: u64,
    pub sa_reference_size: usize,
    pub sa_bounds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub smiles: String,
    pub props: PropertyVector,
    pub tox: f64,
    pub sa: f64,
    pub pool: PoolLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub task: TaskSpec,
    /// SHA-256 of the ingested input.
    pub input_hash: String,
    pub scorers: ScorerVersions,
    pub seed: u64,
    pub n_records: usize,
    pub n_invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub records: Vec<CorpusRecord>,
    pub metadata: CorpusMetadata,
}

impl LabeledCorpus {
    pub fn pool(&self, label: PoolLabel) -> Vec<&CorpusRecord> {
        self.records.iter().filter(|r| r.pool == label).collect()
    }

    pub fn smiles(&self) -> Vec<String> {
        self.records.iter().map(|r| r.smiles.clone()).collect()
    }

    /// SHA-256 over the CSV serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(corpus_csv(&self.records).as_bytes()))
    }
}

/// Scores one SMILES; `Err` carries the reason it was dropped.
pub fn score_record(
    smiles: &str,
    task: &TaskSpec,
    scorers: &Scorers,
) -> Result<CorpusRecord, String> {
    let (graph, report) = check(smiles);
    let graph = match graph {
        Some(g) if report.valid => g,
        _ => return Err(format!("{:?}", report.failures)),
    };
    let props = content_properties(&graph).map_err(|e| e.to_string())?;
    let tox = scorers.tox.predict(&graph);
    let sa = scorers.sa.score(&graph).map_err(|e| e.to_string())?;
    Ok(CorpusRecord {
        smiles: smiles.to_string(),
        props,
        tox,
        sa,
        pool: task.label(scorers.style_score(task, tox, sa)),
    })
}

/// Labels SMILES lines; the first whitespace- or comma-separated field of a
/// line is the SMILES, anything after it is ignored.
pub fn ingest_lines(
    text: &str,
    task: &TaskSpec,
    scorers: &Scorers,
    seed: u64,
) -> Result<LabeledCorpus, DataError> {
    let mut records = Vec::new();
    let mut n_invalid = 0;
    for (lineno, line) in text.lines().enumerate() {
        let Some(smiles) = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .find(|f| !f.is_empty())
        else {
            continue;
        };
        if smiles.starts_with('#') || smiles == "smiles" {
            continue;
        }
        match score_record(smiles, task, scorers) {
            Ok(r) => records.push(r),
            Err(reason) => {
                n_invalid += 1;
                warn!("line {}: dropping {smiles:?}: {reason}", lineno + 1);
            }
        }
    }
    let metadata = CorpusMetadata {
        task: *task,
        input_hash: hex::encode(Sha256::digest(text.as_bytes())),
        scorers: scorers.versions(),
        seed,
        n_records: records.len(),
        n_invalid,
    };
    Ok(LabeledCorpus { records, metadata })
}

pub fn ingest(
    path: &Path,
    task: &TaskSpec,
    scorers: &Scorers,
    seed: u64,
) -> Result<LabeledCorpus, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::FileNotFound(path.display().to_string()),
        _ => DataError::Io(e.to_string()),
    })?;
    let corpus = ingest_lines(&text, task, scorers, seed)?;
    if corpus.records.is_empty() {
        return Err(DataError::AllInvalid(path.display().to_string()));
    }
    Ok(corpus)
}

fn corpus_csv(records: &[CorpusRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CORPUS_HEADER).expect("in-memory write");
    for r in records {
        let p = &r.props;
        w.write_record([
            r.smiles.clone(),
            format!("{}", p.mw),
            format!("{}", p.logp),
            p.hba.to_string(),
            p.hbd.to_string(),
            p.rot_bonds.to_string(),
            p.rings.to_string(),
            p.net_charge.to_string(),
            format!("{}", p.tpsa),
            format!("{}", r.tox),
            format!("{}", r.sa),
            r.pool.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Path of the metadata file accompanying a corpus CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes the CSV and its JSON metadata sidecar.
pub fn write_corpus(path: &Path, corpus: &LabeledCorpus) -> Result<(), DataError> {
    let io = |e: std::io::Error| DataError::Io(e.to_string());
    std::fs::write(path, corpus_csv(&corpus.records)).map_err(io)?;
    let meta =
        serde_json::to_string_pretty(&corpus.metadata).map_err(|e| DataError::Io(e.to_string()))?;
    std::fs::write(sidecar_path(path), meta + "\n").map_err(io)
}

pub fn read_corpus(path: &Path) -> Result<LabeledCorpus, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::FileNotFound(path.display().to_string()),
        _ => DataError::Io(e.to_string()),
    })?;
    let meta_path = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|_| DataError::FileNotFound(meta_path.display().to_string()))?;
    let metadata: CorpusMetadata =
        serde_json::from_str(&meta_text).map_err(|e| DataError::Malformed(e.to_string()))?;
    let bad = |m: String| DataError::Malformed(m);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CORPUS_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let f = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number {:?}", &row[i])))
        };
        let u = |i: usize| {
            row[i]
                .parse::<u32>()
                .map_err(|_| bad(format!("bad count {:?}", &row[i])))
        };
        let pool = match &row[11] {
            "source" => PoolLabel::Source,
            "target" => PoolLabel::Target,
            "neither" => PoolLabel::Neither,
            other => return Err(bad(format!("bad pool label {other:?}"))),
        };
        records.push(CorpusRecord {
            smiles: row[0].to_string(),
            props: PropertyVector {
                mw: f(1)?,
                logp: f(2)?,
                hba: u(3)?,
                hbd: u(4)?,
                rot_bonds: u(5)?,
                rings: u(6)?,
                net_charge: row[7]
                    .parse()
                    .map_err(|_| bad(format!("bad charge {:?}", &row[7])))?,
                tpsa: f(8)?,
            },
            tox: f(9)?,
            sa: f(10)?,
            pool,
        });
    }
    Ok(LabeledCorpus { records, metadata })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.85,
            dev: 0.05,
            test: 0.10,
            seed: 0,
        }
    }
}

/// Seeded shuffle, then contiguous train/dev/test partitions.
pub fn split<T: Clone>(
    items: &[T],
    spec: &SplitSpec,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), DataError> {
    let fr = [spec.train, spec.dev, spec.test];
    if fr.iter().any(|f| !(*f >= 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::BadSplit);
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = ((n as f64) * spec.train).round() as usize;
    let n_dev = (((n as f64) * spec.dev).round() as usize).min(n - n_train);
    let pick = |range: &[usize]| range.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_dev]),
        pick(&order[n_train + n_dev..]),
    ))
}

/// `k` distinct indices into a pool of `pool_len`, never drawing an index
/// listed in `exclude`.
pub fn sample_style_instances(
    pool_len: usize,
    k: usize,
    exclude: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, DataError> {
    let banned: HashSet<usize> = exclude.iter().copied().filter(|&i| i < pool_len).collect();
    let candidates: Vec<usize> = (0..pool_len).filter(|i| !banned.contains(i)).collect();
    if candidates.len() < k {
        return Err(DataError::PoolTooSmall {
            needed: k,
            available: candidates.len(),
        });
    }
    Ok(candidates.choose_multiple(rng, k).copied().collect())
}

/// Seeded form over SMILES: `k` distinct molecules, excluding `exclude` when given.
pub fn sample_style_molecules(
    pool: &[String],
    k: usize,
    exclude: Option<&str>,
    seed: u64,
) -> Result<Vec<String>, DataError> {
    let banned: Vec<usize> = pool
        .iter()
        .enumerate()
        .filter(|(_, s)| Some(s.as_str()) == exclude)
        .map(|(i, _)| i)
        .collect();
    let idx = sample_style_instances(pool.len(), k, &banned, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(idx.into_iter().map(|i| pool[i].clone()).collect())
}
