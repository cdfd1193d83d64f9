use thiserror::Error;

use molxfer_chem::PropertyError;
use molxfer_nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VaeError {
    #[error("token {0:?} is not in the vocabulary")]
    OutOfVocabularyToken(String),
    #[error("cannot tokenize input: {0}")]
    Tokenize(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint vocabulary does not match")]
    VocabularyMismatch,
    #[error("invalid molecule {0:?}")]
    InvalidMolecule(String),
    #[error(transparent)]
    Params(#[from] NnError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("need at least 2 style instances, got {0}")]
    TooFewInstances(usize),
    #[error("latent width {found} does not match flow width {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("no valid molecule in {0}")]
    AllInvalid(String),
    #[error("pool has {available} molecules, {needed} needed")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("split fractions must be non-negative and sum to 1")]
    BadSplit,
    #[error("malformed corpus file: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Property(#[from] PropertyError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("empty {0} pool")]
    EmptyPool(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("invalid input molecule {0:?}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("frozen model parameters changed during training")]
    FrozenModelChanged,
    #[error("transfer model was trained against a different VAE")]
    VaeHashMismatch,
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Params(#[from] NnError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cannot score molecule {0:?}")]
    ScoringFailure(String),
    #[error("geometric mean factor {0} is negative")]
    NegativeFactor(f64),
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Property(#[from] PropertyError),
}
