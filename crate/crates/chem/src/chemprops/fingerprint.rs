//! Circular (Morgan-style) fingerprints.
//!
//! Atom identifiers are 64-bit values produced by [`hash_words`], a fixed
//! splitmix64-based mix seeded with [`HASH_SEED`]. Round 0 hashes
//! `(atomic number, heavy degree, charge, aromatic, hydrogens)`; round `r`
//! hashes `(r, previous id, sorted (bond code, neighbor id) pairs)`.

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::graph::MolGraph;

pub const HASH_SEED: u64 = 0x6d6f_6c78_6665_7231;
pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: usize = 2;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Order-sensitive hash of a word sequence.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = splitmix(HASH_SEED ^ words.len() as u64);
    for &w in words {
        h = splitmix(h ^ w);
    }
    h
}

/// Identifiers per round: `ids[r][atom]` for `r` in `0..=radius`.
pub fn atom_environment_ids(graph: &MolGraph, radius: usize) -> Vec<Vec<u64>> {
    let n = graph.atom_count();
    let initial: Vec<u64> = (0..n)
        .map(|i| {
            let a = graph.atom(i);
            hash_words(&[
                a.element.atomic_number() as u64,
                graph.heavy_degree(i) as u64,
                a.formal_charge as i64 as u64,
                a.aromatic as u64,
                graph.hydrogen_count(i) as u64,
            ])
        })
        .collect();
    let mut rounds = vec![initial];
    for r in 1..=radius {
        let prev = &rounds[r - 1];
        let next = (0..n)
            .map(|i| {
                let mut nb: Vec<(u64, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .filter(|&&(v, _)| graph.atom(v).element != Element::H)
                    .map(|&(v, b)| (graph.bonds()[b].order.code() as u64, prev[v]))
                    .collect();
                nb.sort_unstable();
                let mut words = vec![r as u64, prev[i]];
                for (code, id) in nb {
                    words.push(code);
                    words.push(id);
                }
                hash_words(&words)
            })
            .collect();
        rounds.push(next);
    }
    rounds
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: usize,
}

impl Fingerprint {
    pub fn empty(width: usize, radius: usize) -> Self {
        assert!(width > 0, "fingerprint width must be positive");
        Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.width == other.width
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }
}

pub fn circular_fingerprint(graph: &MolGraph, radius: usize, width: usize) -> Fingerprint {
    let mut fp = Fingerprint::empty(width, radius);
    for round in atom_environment_ids(graph, radius) {
        for id in round {
            fp.set((id % width as u64) as usize);
        }
    }
    fp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn fp(s: &str, r: usize) -> Fingerprint {
        circular_fingerprint(&parse_smiles(s).unwrap(), r, DEFAULT_WIDTH)
    }

    #[test]
    fn same_graph_same_bits() {
        assert_eq!(fp("OCC", 2), fp("CCO", 2));
        assert_ne!(fp("C", 2), fp("N", 2));
    }

    #[test]
    fn radius_zero_is_subset() {
        let r0 = fp("CCO", 0);
        let r2 = fp("CCO", 2);
        assert!(r0.is_subset_of(&r2));
        assert!(r2.count_ones() <= 3 * 3);
    }

    #[test]
    fn hash_is_order_sensitive() {
        assert_ne!(hash_words(&[1, 2]), hash_words(&[2, 1]));
        assert_ne!(hash_words(&[0]), hash_words(&[0, 0]));
    }
}
