//! Content properties, fingerprints, synthetic accessibility, structural
//! alerts and the toxicity surrogate.

pub mod alerts;
pub mod fingerprint;
pub mod properties;
pub mod sa;
pub mod tables;
pub mod tox;

pub use alerts::{bundled_alerts, match_alerts, parse_alerts, AlertPattern, AtomQuery, BondQuery};
pub use fingerprint::{circular_fingerprint, Fingerprint};
pub use properties::{
    content_properties, content_properties_with, hba, hbd, logp, molecular_weight, net_charge,
    rotatable_bonds, tpsa, PropertyOptions, PropertyVector,
};
pub use sa::{penalties, reference_smiles, FragmentFreqTable, Penalties};
pub use tox::{auroc, train_tox_predictor, ToxConfig, ToxModel};
