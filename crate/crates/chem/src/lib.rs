//! Molecular graphs from SMILES, plus property, fingerprint, synthetic
//! accessibility, structural alert and toxicity scoring.

pub mod chemprops;
pub mod element;
pub mod error;
pub mod graph;
pub mod smiles;
pub mod valence;

pub use element::Element;
pub use error::{GraphError, PropertyError, SmilesError, TableError};
pub use graph::{Atom, Bond, BondOrder, MolGraph};
