use thiserror::Error;

use molxfer::{DataError, MetricsError, TransferError, VaeError};
use molxfer_chem::PropertyError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("training aborted: {0}")]
    TrainingAborted(String),
    #[error("scoring failure: {0}")]
    Scoring(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadConfig(_) => 2,
            CliError::MissingCheckpoint(_) | CliError::MissingArtifact(_) => 3,
            CliError::TrainingAborted(_) => 4,
            CliError::Scoring(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PropertyError> for CliError {
    fn from(e: PropertyError) -> Self {
        CliError::Scoring(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::EmptyTestSet => CliError::MissingArtifact(e.to_string()),
            _ => CliError::Scoring(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let msg = e.to_string();
        match e {
            DataError::FileNotFound(_) | DataError::Malformed(_) => CliError::MissingArtifact(msg),
            DataError::PoolTooSmall { .. } | DataError::BadSplit => CliError::BadConfig(msg),
            DataError::AllInvalid(_) | DataError::Property(_) => CliError::Scoring(msg),
            DataError::Io(_) => CliError::Io(msg),
        }
    }
}

impl From<VaeError> for CliError {
    fn from(e: VaeError) -> Self {
        let msg = e.to_string();
        match e {
            VaeError::NonFiniteLoss { .. } | VaeError::Params(_) => CliError::TrainingAborted(msg),
            VaeError::InvalidConfig(_) => CliError::BadConfig(msg),
            VaeError::EmptyCorpus | VaeError::VocabularyMismatch => CliError::MissingArtifact(msg),
            VaeError::OutOfVocabularyToken(_)
            | VaeError::Tokenize(_)
            | VaeError::InvalidMolecule(_)
            | VaeError::Property(_) => CliError::Scoring(msg),
            VaeError::Io(_) => CliError::MissingCheckpoint(msg),
        }
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        let msg = e.to_string();
        match e {
            TransferError::NonFiniteLoss(_)
            | TransferError::FrozenModelChanged
            | TransferError::Params(_)
            | TransferError::Flow(_)
            | TransferError::DimensionMismatch { .. } => CliError::TrainingAborted(msg),
            TransferError::InvalidConfig(_) => CliError::BadConfig(msg),
            TransferError::EmptyPool(_) => CliError::MissingArtifact(msg),
            TransferError::VaeHashMismatch | TransferError::Io(_) => {
                CliError::MissingCheckpoint(msg)
            }
            TransferError::InvalidInput(_) => CliError::Scoring(msg),
            TransferError::Vae(e) => e.into(),
            TransferError::Data(e) => e.into(),
            TransferError::Metrics(e) => e.into(),
        }
    }
}
