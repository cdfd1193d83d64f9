//! Fragment-frequency synthetic accessibility score.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::chemprops::fingerprint::atom_environment_ids;
use crate::error::PropertyError;
use crate::graph::MolGraph;

pub const SA_RADIUS: usize = 2;

const REFERENCE_CORPUS: &str = include_str!("../../data/reference_corpus.smi");

/// Bundled reference molecules, one SMILES each.
pub fn reference_smiles() -> Vec<&'static str> {
    REFERENCE_CORPUS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub size: f64,
    pub fusion: f64,
    pub macrocycle: f64,
    pub charge: f64,
}

impl Penalties {
    pub fn total(&self) -> f64 {
        self.size + self.fusion + self.macrocycle + self.charge
    }
}

pub fn penalties(graph: &MolGraph) -> Penalties {
    let heavy = graph
        .atoms()
        .iter()
        .filter(|a| a.element != crate::element::Element::H)
        .count() as f64;
    let ring = graph.ring_bonds();
    let mut ring_degree = vec![0usize; graph.atom_count()];
    for (b, &r) in graph.bonds().iter().zip(&ring) {
        if r {
            ring_degree[b.a] += 1;
            ring_degree[b.b] += 1;
        }
    }
    let fused = graph
        .bonds()
        .iter()
        .zip(&ring)
        .filter(|(b, &r)| r && ring_degree[b.a] >= 3 && ring_degree[b.b] >= 3)
        .count() as f64;
    let macro_ring = graph
        .smallest_ring_per_bond()
        .iter()
        .any(|s| s.is_some_and(|s| s > 8));
    let charged = graph
        .atoms()
        .iter()
        .filter(|a| a.formal_charge != 0)
        .count() as f64;
    Penalties {
        size: heavy.powf(1.005) - heavy,
        fusion: (fused + 1.0).ln(),
        macrocycle: if macro_ring {
            std::f64::consts::LN_2
        } else {
            0.0
        },
        charge: 0.5 * charged,
    }
}

/// Distinct radius-2 fragment identifiers of a molecule.
pub fn fragments(graph: &MolGraph) -> BTreeSet<u64> {
    atom_environment_ids(graph, SA_RADIUS)
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentFreqTable {
    contributions: HashMap<u64, f64>,
    unseen: f64,
    /// Raw scores mapping to SA 10 and SA 1 respectively.
    lo: f64,
    hi: f64,
    n_molecules: usize,
}

impl FragmentFreqTable {
    /// Counts, per fragment, the reference molecules containing it; the
    /// contribution is `ln((count + 1) / (n + 1))`. Calibration bounds are the
    /// 5th and 95th percentiles of raw scores over the same corpus.
    pub fn build(corpus: &[MolGraph]) -> Result<Self, PropertyError> {
        if corpus.is_empty() {
            return Err(PropertyError::EmptyCorpus);
        }
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for g in corpus {
            for f in fragments(g) {
                *counts.entry(f).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let contributions = counts
            .into_iter()
            .map(|(id, c)| (id, ((c as f64 + 1.0) / (n + 1.0)).ln()))
            .collect();
        let mut table = FragmentFreqTable {
            contributions,
            unseen: (1.0 / (n + 1.0)).ln(),
            lo: 0.0,
            hi: 1.0,
            n_molecules: corpus.len(),
        };
        let mut raws: Vec<f64> = corpus.iter().map(|g| table.raw_score(g)).collect();
        raws.sort_by(f64::total_cmp);
        table.lo = percentile(&raws, 0.05);
        table.hi = percentile(&raws, 0.95);
        if table.hi - table.lo < 1e-9 {
            table.hi = table.lo + 1.0;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.contributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contributions.is_empty()
    }

    pub fn n_molecules(&self) -> usize {
        self.n_molecules
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contribution(&self, fragment: u64) -> f64 {
        self.contributions
            .get(&fragment)
            .copied()
            .unwrap_or(self.unseen)
    }

    pub fn fragment_score(&self, graph: &MolGraph) -> f64 {
        let frags = fragments(graph);
        if frags.is_empty() {
            return self.unseen;
        }
        frags.iter().map(|&f| self.contribution(f)).sum::<f64>() / frags.len() as f64
    }

    /// Fragment score minus complexity penalties; higher is easier.
    pub fn raw_score(&self, graph: &MolGraph) -> f64 {
        self.fragment_score(graph) - penalties(graph).total()
    }

    /// Maps a raw score onto [1, 10], 10 being hardest.
    pub fn scale(&self, raw: f64) -> f64 {
        (1.0 + 9.0 * (self.hi - raw) / (self.hi - self.lo)).clamp(1.0, 10.0)
    }

    pub fn score(&self, graph: &MolGraph) -> Result<f64, PropertyError> {
        if self.contributions.is_empty() {
            return Err(PropertyError::EmptyTable);
        }
        Ok(self.scale(self.raw_score(graph)))
    }
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
