//! Reverse-mode automatic differentiation on dense `f64` matrices, with the
//! layers and optimizer needed by the molecular models.

pub mod adam;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use error::NnError;
pub use graph::{log_sigmoid, sigmoid, Gradients, Graph, Var};
pub use layers::{Activation, Gru, Linear, Mlp};
pub use ndarray::{self, Array2};
pub use params::{ParamId, ParamStore};
