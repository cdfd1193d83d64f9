//! Corpus generation, ingestion, pools and splits.

pub mod corpus;
pub mod generator;
pub mod task;

pub use corpus::{
    ingest, ingest_lines, read_corpus, sample_style_instances, sample_style_molecules,
    score_record, sidecar_path, split, write_corpus, CorpusMetadata, CorpusRecord, LabeledCorpus,
    Scorers, SplitSpec,
};
pub use generator::{make_desk_corpus, GeneratorConfig, UniqueMolecules};
pub use task::{build_sa_table, build_scorers, build_task_corpus, build_tox_model, DeskTaskConfig};
