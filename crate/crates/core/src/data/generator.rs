//! Randomized fragment assembly for desk-scale corpora.

use std::collections::HashSet;

use molxfer_chem::smiles::{parse_smiles, tokenize, validate, write};
use molxfer_chem::{BondOrder, Element, MolGraph};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Ring systems and short chains; a molecule is one to three of these.
const UNITS: &[(&str, u32)] = &[
    ("c1ccccc1", 10),
    ("c1ccncc1", 3),
    ("C1CCCCC1", 3),
    ("C1CCNCC1", 3),
    ("C1CCOCC1", 2),
    ("C1CCCC1", 2),
    ("c1ccsc1", 1),
    ("c1ccoc1", 1),
    ("c1cc[nH]c1", 1),
    ("C1CCNC1", 1),
    ("CCC", 2),
    ("CC(C)C", 1),
];

/// Connections between units. The second value is the far atom.
const LINKERS: &[(&str, usize, u32)] = &[
    ("", 0, 3),
    ("C", 0, 3),
    ("CC", 1, 1),
    ("O", 0, 2),
    ("N", 0, 2),
    ("C(=O)N", 2, 2),
    ("S", 0, 1),
];

/// Substituents on unit atoms. Atom 0 is the attachment point.
const SUBSTITUENTS: &[(&str, u32)] = &[
    ("C", 8),
    ("CC", 2),
    ("O", 4),
    ("N", 3),
    ("F", 3),
    ("Cl", 3),
    ("C(=O)O", 2),
    ("C(N)=O", 2),
    ("OC", 3),
    ("C#N", 1),
    ("C(F)(F)F", 1),
    ("CO", 1),
    ("C=O", 1),
    ("Br", 1),
];

/// Unusual units: strained, fused, bridged, spiro and macro rings.
const RARE_UNITS: &[(&str, u32)] = &[
    ("C1CCCCCCCCCC1", 2),
    ("C1CCCCCCCC1", 1),
    ("C1CC2(CC1)CCC2", 2),
    ("C1CC2CCC1C2", 2),
    ("c1ccc2cc3ccccc3cc2c1", 1),
    ("C1=CC=CC=CC=C1", 1),
    ("C1CCC1", 2),
    ("c1cc[se]c1", 1),
    ("C12CC(C1)C2", 1),
    ("C1CC2CC1C1CCCC21", 1),
    ("C[n+]1ccccc1", 1),
];

/// Unusual substituents: heavy or charged atoms and reactive groups. Bracket
/// attachment atoms give up one written hydrogen when bonded.
const RARE_SUBSTITUENTS: &[(&str, u32)] = &[
    ("[NH4+]", 2),
    ("C(=O)[O-]", 2),
    ("[NH+](=O)[O-]", 1),
    ("[SeH2]", 2),
    ("[SiH](C)(C)C", 2),
    ("B(O)O", 2),
    ("P(=O)(O)O", 2),
    ("C=C=C", 1),
    ("C#CC#C", 1),
    ("N=[N+]=[N-]", 1),
    ("OO", 1),
    ("SS", 1),
    ("S(F)(=O)=O", 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub min_heavy_atoms: usize,
    pub max_heavy_atoms: usize,
    /// Upper bound on SMILES tokens of an emitted molecule.
    pub max_tokens: usize,
    /// Per-molecule complexity is drawn uniformly from this range; it is the
    /// probability that each drawn piece comes from the unusual set.
    pub complexity_min: f64,
    pub complexity_max: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            min_heavy_atoms: 6,
            max_heavy_atoms: 24,
            max_tokens: 48,
            complexity_min: 0.0,
            complexity_max: 1.0,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, table: &'a [(&'a str, u32)]) -> &'a str {
    let total: u32 = table.iter().map(|&(_, w)| w).sum();
    let mut x = rng.gen_range(0..total);
    for &(s, w) in table {
        if x < w {
            return s;
        }
        x -= w;
    }
    unreachable!("weights cover the range")
}

fn heavy_atoms(g: &MolGraph) -> usize {
    g.atoms().iter().filter(|a| a.element != Element::H).count()
}

fn free_h(g: &MolGraph, i: usize) -> bool {
    g.atom(i).total_h() > 0
}

/// Bonds atom `piece_site` of `piece` to atom `site` of `mol`, taking one
/// hydrogen from each end.
fn attach(mol: &MolGraph, site: usize, piece: &MolGraph, piece_site: usize) -> MolGraph {
    let offset = mol.atom_count();
    let joined = mol
        .union(piece)
        .with_bond(site, offset + piece_site, BondOrder::Single)
        .expect("new bond joins distinct components");
    let mut atoms = joined.atoms().to_vec();
    for i in [site, offset + piece_site] {
        if let Some(h) = atoms[i].explicit_h.as_mut() {
            *h -= 1;
        }
    }
    let mut g = MolGraph::new(atoms, joined.bonds().to_vec()).expect("same bonds");
    g.assign_implicit_hydrogens();
    g
}

fn choose<R: Rng>(rng: &mut R, sites: &[usize]) -> Option<usize> {
    (!sites.is_empty()).then(|| sites[rng.gen_range(0..sites.len())])
}

/// Carbon or ring atoms that still carry a hydrogen.
fn unit_sites(g: &MolGraph) -> Vec<usize> {
    let ring = g.ring_atoms();
    (0..g.atom_count())
        .filter(|&i| free_h(g, i) && (ring[i] || g.atom(i).element == Element::C))
        .collect()
}

fn parse_piece(s: &str) -> MolGraph {
    parse_smiles(s).expect("bundled fragment parses")
}

fn build_unit<R: Rng>(rng: &mut R, complexity: f64) -> MolGraph {
    let mut unit = if rng.gen_bool(complexity * 0.5) {
        parse_piece(pick(rng, RARE_UNITS))
    } else {
        parse_piece(pick(rng, UNITS))
    };
    let n_subs = rng.gen_range(0..=2);
    for _ in 0..n_subs {
        let sub = if rng.gen_bool(complexity * 0.5) {
            pick(rng, RARE_SUBSTITUENTS)
        } else {
            pick(rng, SUBSTITUENTS)
        };
        let sub = parse_piece(sub);
        if let Some(site) = choose(rng, &unit_sites(&unit)) {
            unit = attach(&unit, site, &sub, 0);
        }
    }
    unit
}

/// Assembles one molecule from one to three units joined by linkers; `None`
/// when the draw fails validation or the size limits.
pub fn assemble<R: Rng>(rng: &mut R, config: &GeneratorConfig, complexity: f64) -> Option<String> {
    let n_units = [1, 2, 2, 3][rng.gen_range(0..4)];
    let mut mol = build_unit(rng, complexity);
    for _ in 1..n_units {
        let total: u32 = LINKERS.iter().map(|l| l.2).sum();
        let mut x = rng.gen_range(0..total);
        let &(linker, far, _) = LINKERS
            .iter()
            .find(|l| {
                if x < l.2 {
                    true
                } else {
                    x -= l.2;
                    false
                }
            })
            .expect("weights cover the range");
        let site = choose(rng, &unit_sites(&mol))?;
        let anchor = if linker.is_empty() {
            site
        } else {
            let before = mol.atom_count();
            mol = attach(&mol, site, &parse_piece(linker), 0);
            before + far
        };
        let unit = build_unit(rng, complexity);
        let unit_site = choose(rng, &unit_sites(&unit))?;
        if !free_h(&mol, anchor) {
            return None;
        }
        mol = attach(&mol, anchor, &unit, unit_site);
    }
    let n = heavy_atoms(&mol);
    if n < config.min_heavy_atoms || n > config.max_heavy_atoms || !validate(&mol).valid {
        return None;
    }
    let text = write(&mol);
    let tokens = tokenize(&text).ok()?.len();
    (tokens <= config.max_tokens).then_some(text)
}

/// Endless stream of distinct molecules (distinct by writer output).
#[derive(Debug, Clone)]
pub struct UniqueMolecules {
    config: GeneratorConfig,
    rng: ChaCha8Rng,
    seen: HashSet<String>,
    attempts: usize,
}

impl UniqueMolecules {
    pub fn new(config: &GeneratorConfig) -> Self {
        UniqueMolecules {
            config: *config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            seen: HashSet::new(),
            attempts: 0,
        }
    }

    /// Assembly attempts so far, including rejected and duplicate ones.
    pub fn attempts(&self) -> usize {
        self.attempts
    }
}

impl Iterator for UniqueMolecules {
    type Item = String;

    fn next(&mut self) -> Option<String> {
        let limit = 1000 * (self.seen.len() + 10);
        while self.attempts < limit {
            self.attempts += 1;
            let c = self
                .rng
                .gen_range(self.config.complexity_min..=self.config.complexity_max);
            if let Some(s) = assemble(&mut self.rng, &self.config, c) {
                if self.seen.insert(s.clone()) {
                    return Some(s);
                }
            }
        }
        None
    }
}

/// Generates `size` distinct molecules.
pub fn make_desk_corpus(config: &GeneratorConfig, size: usize) -> Vec<String> {
    let out: Vec<String> = UniqueMolecules::new(config).take(size).collect();
    assert_eq!(
        out.len(),
        size,
        "generator cannot produce {size} distinct molecules under this config"
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use molxfer_chem::smiles::is_valid;

    #[test]
    fn fragments_parse_and_attach() {
        let all = UNITS
            .iter()
            .chain(SUBSTITUENTS)
            .chain(RARE_UNITS)
            .chain(RARE_SUBSTITUENTS);
        for &(s, _) in all {
            let g = parse_smiles(s).unwrap();
            assert!(free_h(&g, 0), "{s} has no attachment hydrogen");
            let benzene = parse_smiles("c1ccccc1").unwrap();
            let joined = attach(&benzene, 0, &g, 0);
            assert!(
                validate(&joined).valid,
                "{s}: {:?}",
                validate(&joined).failures
            );
        }
    }

    #[test]
    fn corpus_is_valid_unique_and_deterministic() {
        let cfg = GeneratorConfig::default();
        let a = make_desk_corpus(&cfg, 100);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|s| is_valid(s)));
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 100);
        assert_eq!(a, make_desk_corpus(&cfg, 100));
    }
}
