//! Guided variational autoencoder over SMILES token sequences.

pub mod attributes;
pub mod grammar;
pub mod model;
pub mod train;
pub mod vocab;

pub use attributes::{AttributeKind, AttributeSpec, ATTRIBUTE_NAMES, MW_SLOT, N_ATTRIBUTES};
pub use grammar::{DecodeGrammar, GrammarState};
pub use model::{
    standard_normal, DecodeMode, Encoded, LossTerms, VAEConfig, VAEModel, VAE_STORE_TAG,
};
pub use train::{pretrain, r_squared, PretrainOptions, PretrainReport, StepLog};
pub use vocab::Vocabulary;
