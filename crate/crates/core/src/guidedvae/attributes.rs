//! Guided attribute targets: seven standardized continuous properties and
//! aromatic-ring presence.

use molxfer_chem::chemprops::{content_properties, PropertyVector};
use molxfer_chem::MolGraph;
use serde::{Deserialize, Serialize};

use crate::error::VaeError;

pub const N_ATTRIBUTES: usize = 8;
pub const ATTRIBUTE_NAMES: [&str; N_ATTRIBUTES] = [
    "mw", "logp", "hba", "hbd", "rot", "rings", "tpsa", "aromatic",
];
pub const MW_SLOT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    pub mean: f64,
    pub std: f64,
}

impl AttributeSpec {
    pub fn normalize(&self, raw: f64) -> f64 {
        match self.kind {
            AttributeKind::Continuous => (raw - self.mean) / self.std,
            AttributeKind::Binary => raw,
        }
    }
}

/// Raw attribute values in slot order.
pub fn raw_attributes(graph: &MolGraph, props: &PropertyVector) -> [f64; N_ATTRIBUTES] {
    let aromatic = graph.atoms().iter().any(|a| a.aromatic);
    [
        props.mw,
        props.logp,
        props.hba as f64,
        props.hbd as f64,
        props.rot_bonds as f64,
        props.rings as f64,
        props.tpsa,
        if aromatic { 1.0 } else { 0.0 },
    ]
}

pub fn attributes_of(graph: &MolGraph) -> Result<[f64; N_ATTRIBUTES], VaeError> {
    let props = content_properties(graph)?;
    Ok(raw_attributes(graph, &props))
}

/// Means and standard deviations over the training rows; a zero spread is
/// replaced by 1 so every continuous std stays positive.
pub fn fit_specs(rows: &[[f64; N_ATTRIBUTES]]) -> Result<Vec<AttributeSpec>, VaeError> {
    if rows.is_empty() {
        return Err(VaeError::EmptyCorpus);
    }
    let n = rows.len() as f64;
    Ok((0..N_ATTRIBUTES)
        .map(|t| {
            let kind = if t == N_ATTRIBUTES - 1 {
                AttributeKind::Binary
            } else {
                AttributeKind::Continuous
            };
            let mean = rows.iter().map(|r| r[t]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / n;
            let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            AttributeSpec {
                name: ATTRIBUTE_NAMES[t].to_string(),
                kind,
                mean,
                std,
            }
        })
        .collect())
}

pub fn normalize_row(specs: &[AttributeSpec], raw: &[f64; N_ATTRIBUTES]) -> [f64; N_ATTRIBUTES] {
    let mut out = [0.0; N_ATTRIBUTES];
    for t in 0..N_ATTRIBUTES {
        out[t] = specs[t].normalize(raw[t]);
    }
    out
}
