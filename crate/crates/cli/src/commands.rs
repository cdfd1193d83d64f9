//! Subcommand implementations. Every command that writes into the output
//! directory holds its lock and records the resolved config and input hashes.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use molxfer::checkpoint::{load_json, save_json, VaeCheckpoint};
use molxfer::data::{
    build_scorers, build_task_corpus, ingest, make_desk_corpus, read_corpus, split, write_corpus,
    LabeledCorpus, Scorers,
};
use molxfer::guidedvae::{pretrain, standard_normal, DecodeMode, PretrainOptions, Vocabulary};
use molxfer::metrics::{
    records_from_csv, validity_rate, PoolLabel, PssScales, StyleScorer, TaskKind, TaskSpec,
};
use molxfer::transfer::{
    random_pairing_baseline, results_to_csv, train, ModelBundle, TrainOptions, TransferCheckpoint,
    Transferer,
};
use molxfer_chem::chemprops::content_properties;
use molxfer_chem::smiles::{parse_valid, tokenize};
use rand::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot;

const LOCK_FILE: &str = ".molxfer.lock";

/// Exclusive ownership of an output directory for the lifetime of a command.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::BadConfig(format!(
                    "{} is in use by another run; remove {} if that run is gone",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| missing(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn missing(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::MissingArtifact(path.display().to_string())
    } else {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

/// Writes `<command>.config.toml` and `<command>.inputs.json` into the output directory.
fn record_run(config: &RunConfig, command: &str, inputs: &[&Path]) -> Result<(), CliError> {
    let dir = &config.paths.out_dir;
    fs::write(dir.join(format!("{command}.config.toml")), config.to_toml())?;
    let mut hashes = BTreeMap::new();
    for p in inputs {
        hashes.insert(p.display().to_string(), file_hash(p)?);
    }
    write_json(&dir.join(format!("{command}.inputs.json")), &hashes)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn task(config: &RunConfig) -> TaskSpec {
    TaskSpec::for_kind(config.task)
}

fn scorers_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("scorers.json")
}

fn desk_path(config: &RunConfig) -> PathBuf {
    config.paths.out_dir.join("desk.smi")
}

/// Loads the cached scorers of the output directory, building and caching them when absent.
fn load_scorers(config: &RunConfig) -> Result<Scorers, CliError> {
    let path = scorers_path(config);
    if path.exists() {
        return load_json(&path)
            .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())));
    }
    info!("building scorers");
    let scorers = build_scorers(&config.data.desk)?;
    save_json(&path, &scorers)?;
    Ok(scorers)
}

fn style_scorer(config: &RunConfig, scorers: &Scorers) -> StyleScorer {
    match config.task {
        TaskKind::Toxicity => StyleScorer::Toxicity(scorers.tox.clone()),
        TaskKind::Synthesizability => StyleScorer::Synthesizability(scorers.sa.clone()),
    }
}

/// First field of every non-empty, non-comment line.
fn read_smiles(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| missing(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .find(|f| !f.is_empty())
        })
        .filter(|s| !s.starts_with('#') && *s != "smiles")
        .map(str::to_string)
        .collect())
}

fn load_corpus(config: &RunConfig) -> Result<LabeledCorpus, CliError> {
    let corpus = read_corpus(&config.corpus_path())?;
    if corpus.metadata.task.kind != config.task {
        return Err(CliError::BadConfig(format!(
            "corpus {} was labeled for {:?}, run is configured for {:?}",
            config.corpus_path().display(),
            corpus.metadata.task.kind,
            config.task
        )));
    }
    Ok(corpus)
}

struct Pools {
    source_train: Vec<String>,
    source_test: Vec<String>,
    target_train: Vec<String>,
    scales: PssScales,
}

fn pools(config: &RunConfig, corpus: &LabeledCorpus) -> Result<Pools, CliError> {
    let pool = |label| -> Vec<_> { corpus.pool(label).into_iter().cloned().collect() };
    let (source_train, _, source_test) = split(&pool(PoolLabel::Source), &config.data.split)?;
    let (target_train, _, _) = split(&pool(PoolLabel::Target), &config.data.split)?;
    let props: Vec<_> = source_train
        .iter()
        .chain(&target_train)
        .map(|r| r.props)
        .collect();
    let scales = PssScales::fit(&props)?;
    let smiles =
        |rs: Vec<molxfer::data::corpus::CorpusRecord>| rs.into_iter().map(|r| r.smiles).collect();
    Ok(Pools {
        source_train: smiles(source_train),
        source_test: smiles(source_test),
        target_train: smiles(target_train),
        scales,
    })
}

fn load_vae(config: &RunConfig) -> Result<molxfer::guidedvae::VAEModel, CliError> {
    let path = config.vae_path();
    if !path.exists() {
        return Err(CliError::MissingCheckpoint(path.display().to_string()));
    }
    Ok(VaeCheckpoint::load(&path, None)?.model)
}

fn load_transfer(
    config: &RunConfig,
    vae: &molxfer::guidedvae::VAEModel,
) -> Result<molxfer::transfer::TransferModel, CliError> {
    let path = config.transfer_path();
    if !path.exists() {
        return Err(CliError::MissingCheckpoint(path.display().to_string()));
    }
    Ok(TransferCheckpoint::load(&path, vae)?.model)
}

pub fn gen(config: &RunConfig) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let scorers = build_scorers(&config.data.desk)?;
    save_json(&scorers_path(config), &scorers)?;
    let desk = make_desk_corpus(&config.data.desk.generator, config.data.desk_size);
    fs::write(desk_path(config), desk.join("\n") + "\n")?;
    info!("wrote {} generated molecules", desk.len());
    let corpus = build_task_corpus(&task(config), &scorers, &config.data.desk)?;
    write_corpus(&config.corpus_path(), &corpus)?;
    info!("wrote {} pool molecules", corpus.records.len());
    record_run(config, "gen", &[])
}

pub fn ingest_file(config: &RunConfig, input: &Path) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let scorers = load_scorers(config)?;
    let corpus = ingest(input, &task(config), &scorers, config.seed)?;
    info!(
        "labeled {} molecules ({} source, {} target, {} dropped)",
        corpus.records.len(),
        corpus.pool(PoolLabel::Source).len(),
        corpus.pool(PoolLabel::Target).len(),
        corpus.metadata.n_invalid
    );
    write_corpus(&config.corpus_path(), &corpus)?;
    record_run(config, "ingest", &[input])
}

#[derive(Serialize)]
struct PretrainSummary {
    n_molecules: usize,
    epochs_completed: usize,
    epoch_means: Vec<f64>,
    prior_validity: f64,
}

pub fn pretrain_vae(config: &RunConfig) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let corpus_path = config.corpus_path();
    let corpus = load_corpus(config)?;
    let pools = pools(config, &corpus)?;
    let desk = desk_path(config);
    let mut inputs = vec![corpus_path.as_path()];
    let mut molecules = Vec::new();
    if desk.exists() {
        molecules = read_smiles(&desk)?;
        inputs.push(desk.as_path());
    }
    let mut everything = molecules.clone();
    everything.extend(corpus.smiles());
    let vocab = Vocabulary::build(&everything)?;
    let mut seen: std::collections::HashSet<String> = molecules.iter().cloned().collect();
    for s in pools.source_train.iter().chain(&pools.target_train) {
        if seen.insert(s.clone()) {
            molecules.push(s.clone());
        }
    }
    info!("pretraining on {} molecules", molecules.len());
    let options = PretrainOptions {
        log_path: Some(config.paths.out_dir.join("pretrain_log.jsonl")),
        vocab: Some(vocab),
        ..PretrainOptions::default()
    };
    let (model, report) = pretrain(&molecules, &config.vae, &options)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let z = standard_normal(500, model.latent_dim(), &mut rng);
    let prior_validity = validity_rate(&model.decode_smiles(&z, DecodeMode::Greedy, &mut rng));
    info!("prior-sample validity {prior_validity:.1}%");
    VaeCheckpoint::new(model, report.epochs_completed).save(&config.vae_path())?;
    write_json(
        &config.paths.out_dir.join("pretrain_summary.json"),
        &PretrainSummary {
            n_molecules: report.n_molecules,
            epochs_completed: report.epochs_completed,
            epoch_means: report.epoch_means(),
            prior_validity,
        },
    )?;
    record_run(config, "pretrain", &inputs)
}

#[derive(Serialize)]
struct TrainSummary {
    disc_updates: usize,
    gen_updates: usize,
    vae_hash_before: String,
    vae_hash_after: String,
}

pub fn train_transfer(config: &RunConfig) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let corpus_path = config.corpus_path();
    let vae_path = config.vae_path();
    let vae = load_vae(config)?;
    let corpus = load_corpus(config)?;
    let pools = pools(config, &corpus)?;
    let options = TrainOptions {
        log_path: Some(config.paths.out_dir.join("train_log.jsonl")),
        ..TrainOptions::default()
    };
    let (model, report) = train(
        &pools.source_train,
        &pools.target_train,
        &vae,
        &config.transfer,
        &options,
    )?;
    TransferCheckpoint::new(model).save(&config.transfer_path())?;
    write_json(
        &config.paths.out_dir.join("train_summary.json"),
        &TrainSummary {
            disc_updates: report.disc_updates,
            gen_updates: report.gen_updates,
            vae_hash_before: report.vae_hash_before,
            vae_hash_after: report.vae_hash_after,
        },
    )?;
    record_run(config, "train", &[&corpus_path, &vae_path])
}

pub fn transfer_file(
    config: &RunConfig,
    input: &Path,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let vae = load_vae(config)?;
    let model = load_transfer(config, &vae)?;
    let scorers = load_scorers(config)?;
    let corpus = load_corpus(config)?;
    let pools = pools(config, &corpus)?;
    let scorer = style_scorer(config, &scorers);
    let transferer = Transferer::new(ModelBundle {
        vae: &vae,
        model: &model,
        task: task(config),
        scorer: &scorer,
        scales: &pools.scales,
    })?;
    let molecules = read_smiles(input)?;
    let mut results = Vec::with_capacity(molecules.len());
    for (i, m) in molecules.iter().enumerate() {
        results.push(transferer.transfer(
            m,
            config.transfer.decode_count,
            config.transfer.pss_floor,
            config.seed.wrapping_add(i as u64),
        )?);
    }
    let out = output.map_or_else(
        || config.paths.out_dir.join("transfer.csv"),
        Path::to_path_buf,
    );
    fs::write(&out, results_to_csv(&results))?;
    info!("wrote {} transfers to {}", results.len(), out.display());
    record_run(
        config,
        "transfer",
        &[input, &config.vae_path(), &config.transfer_path()],
    )
}

pub fn eval(config: &RunConfig) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let vae = load_vae(config)?;
    let model = load_transfer(config, &vae)?;
    let scorers = load_scorers(config)?;
    let corpus = load_corpus(config)?;
    let pools = pools(config, &corpus)?;
    let scorer = style_scorer(config, &scorers);
    let spec = task(config);
    let mut test = pools.source_test.clone();
    if config.eval.test_size > 0 {
        test.truncate(config.eval.test_size);
    }
    let transferer = Transferer::new(ModelBundle {
        vae: &vae,
        model: &model,
        task: spec,
        scorer: &scorer,
        scales: &pools.scales,
    })?;
    let (report, results) = transferer.evaluate(&test, config.seed)?;
    let dir = &config.paths.out_dir;
    report.write_csv(&dir.join("metrics.csv"))?;
    fs::write(dir.join("results.csv"), results_to_csv(&results))?;
    fs::write(dir.join("summary.txt"), report.summary.to_text())?;
    info!("transfer summary\n{}", report.summary.to_text());
    if config.eval.baseline {
        let base = random_pairing_baseline(
            &test,
            &pools.target_train,
            &spec,
            &scorer,
            &pools.scales,
            config.seed,
        )?;
        base.write_csv(&dir.join("baseline.csv"))?;
        fs::write(dir.join("baseline_summary.txt"), base.summary.to_text())?;
        info!("random-pairing summary\n{}", base.summary.to_text());
    }
    record_run(
        config,
        "eval",
        &[
            &config.corpus_path(),
            &config.vae_path(),
            &config.transfer_path(),
        ],
    )
}

pub fn props(config: &RunConfig, input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let scorers = load_scorers(config)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "smiles",
        "mw",
        "logp",
        "hba",
        "hbd",
        "rot_bonds",
        "rings",
        "net_charge",
        "tpsa",
        "sa",
        "tox",
    ])
    .map_err(|e| CliError::Io(e.to_string()))?;
    for s in read_smiles(input)? {
        let g =
            parse_valid(&s).ok_or_else(|| CliError::Scoring(format!("invalid molecule {s:?}")))?;
        let p = content_properties(&g)?;
        let sa = scorers.sa.score(&g)?;
        let tox = scorers.tox.predict(&g);
        w.write_record([
            s.clone(),
            format!("{:.6}", p.mw),
            format!("{:.6}", p.logp),
            p.hba.to_string(),
            p.hbd.to_string(),
            p.rot_bonds.to_string(),
            p.rings.to_string(),
            p.net_charge.to_string(),
            format!("{:.6}", p.tpsa),
            format!("{sa:.6}"),
            format!("{tox:.6}"),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let text = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    let out = output.map_or_else(|| config.paths.out_dir.join("props.csv"), Path::to_path_buf);
    fs::write(&out, text)?;
    record_run(config, "props", &[input])
}

pub fn plot_figures(config: &RunConfig) -> Result<(), CliError> {
    let _lock = RunLock::acquire(&config.paths.out_dir)?;
    let corpus = load_corpus(config)?;
    let dir = &config.paths.out_dir;
    let spec = task(config);
    let styles: Vec<f64> = corpus
        .records
        .iter()
        .map(|r| match spec.kind {
            TaskKind::Toxicity => r.tox,
            TaskKind::Synthesizability => r.sa,
        })
        .collect();
    let props: Vec<[f64; 8]> = corpus.records.iter().map(|r| r.props.to_array()).collect();
    plot::pca_scatter(&props, &styles, &dir.join("pca.png"))?;
    plot::histogram(&styles, &dir.join("hist_style.png"))?;
    let mut inputs = vec![config.corpus_path()];
    let metrics = dir.join("metrics.csv");
    if metrics.exists() {
        let text = fs::read_to_string(&metrics)?;
        let records = records_from_csv(&text)?;
        let imp: Vec<f64> = records.iter().filter_map(|r| r.imp).collect();
        let pss: Vec<f64> = records.iter().filter_map(|r| r.pss).collect();
        let after: Vec<f64> = records.iter().filter_map(|r| r.prop_y).collect();
        plot::histogram(&imp, &dir.join("hist_imp.png"))?;
        plot::histogram(&pss, &dir.join("hist_pss.png"))?;
        plot::histogram(&after, &dir.join("hist_prop_after.png"))?;
        inputs.push(metrics);
    } else {
        warn!(
            "no metrics.csv in {}; skipping metric histograms",
            dir.display()
        );
    }
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    record_run(config, "plot", &refs)
}

pub fn tokens(smiles: &str) -> Result<(), CliError> {
    let toks = tokenize(smiles).map_err(|e| CliError::Scoring(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    for t in toks {
        writeln!(out, "{}\t{}", t.text, t.kind)?;
    }
    Ok(())
}
