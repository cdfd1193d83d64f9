//! Named parameter storage with deterministic initialization.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::NnError;

/// Handle to one parameter matrix. The tag identifies the owning store so
/// that several stores can feed a single graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId {
    pub tag: u32,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    tag: u32,
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    frozen: bool,
}

impl ParamStore {
    pub fn new(tag: u32) -> Self {
        ParamStore {
            tag,
            names: Vec::new(),
            values: Vec::new(),
            frozen: false,
        }
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn add(&mut self, name: &str, value: Array2<f64>) -> ParamId {
        self.names.push(name.to_string());
        self.values.push(value);
        ParamId {
            tag: self.tag,
            index: self.values.len() - 1,
        }
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::zeros((rows, cols)))
    }

    /// Uniform Glorot initialization.
    pub fn glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit));
        self.add(name, value)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(|index| ParamId {
            tag: self.tag,
            index,
        })
    }

    fn check(&self, id: ParamId) {
        assert_eq!(id.tag, self.tag, "parameter belongs to another store");
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        self.check(id);
        &self.values[id.index]
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.check(id);
        &self.names[id.index]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|index| ParamId {
                tag: self.tag,
                index,
            })
    }

    pub fn set(&mut self, id: ParamId, value: Array2<f64>) -> Result<(), NnError> {
        self.check(id);
        if self.frozen {
            return Err(NnError::Frozen);
        }
        if value.dim() != self.values[id.index].dim() {
            return Err(NnError::ShapeMismatch {
                name: self.names[id.index].clone(),
                expected: self.values[id.index].dim(),
                found: value.dim(),
            });
        }
        self.values[id.index] = value;
        Ok(())
    }

    /// Mutable access to every value at once, refused when frozen.
    pub fn values_mut(&mut self) -> Result<&mut [Array2<f64>], NnError> {
        if self.frozen {
            return Err(NnError::Frozen);
        }
        Ok(&mut self.values)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// SHA-256 over names, shapes and the little-endian bytes of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, v) in self.names.iter().zip(&self.values) {
            h.update(name.as_bytes());
            h.update((v.nrows() as u64).to_le_bytes());
            h.update((v.ncols() as u64).to_le_bytes());
            for x in v.iter() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
