//! Unsupervised molecular style transfer in a guided VAE latent space.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod guidedvae;
pub mod metrics;
pub mod styleflow;
pub mod transfer;

pub use error::{DataError, FlowError, MetricsError, TransferError, VaeError};
