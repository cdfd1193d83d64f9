//! Independent brute-force oracles for parser, property and alert checks.

#![allow(dead_code)]

use std::collections::VecDeque;

use molxfer_chem::chemprops::{
    bundled_alerts, hba, hbd, molecular_weight, net_charge, reference_smiles, rotatable_bonds,
    AlertPattern, PropertyOptions,
};
use molxfer_chem::smiles::{parse_smiles, parse_valid, write};
use molxfer_chem::{BondOrder, Element, MolGraph};

pub const MAX_ORACLE_ATOMS: usize = 30;
pub const MAX_ALERT_SUITE_ATOMS: usize = 12;

fn atom_label(g: &MolGraph, i: usize) -> (Element, bool, i8, usize, usize) {
    let a = g.atom(i);
    (
        a.element,
        a.aromatic,
        a.formal_charge,
        g.hydrogen_count(i),
        g.degree(i),
    )
}

pub fn bond_order(g: &MolGraph, a: usize, b: usize) -> Option<BondOrder> {
    g.bonds()
        .iter()
        .find(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
        .map(|bd| bd.order)
}

/// Exhaustive backtracking over atom bijections, checking every labeled bond.
pub fn isomorphic(x: &MolGraph, y: &MolGraph) -> bool {
    fn extend(
        x: &MolGraph,
        y: &MolGraph,
        i: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == x.atom_count() {
            return true;
        }
        for j in 0..y.atom_count() {
            if used[j] || atom_label(x, i) != atom_label(y, j) {
                continue;
            }
            if !(0..i).all(|k| bond_order(x, i, k) == bond_order(y, j, map[k])) {
                continue;
            }
            map.push(j);
            used[j] = true;
            if extend(x, y, i + 1, map, used) {
                return true;
            }
            map.pop();
            used[j] = false;
        }
        false
    }
    x.atom_count() == y.atom_count()
        && x.bond_count() == y.bond_count()
        && extend(x, y, 0, &mut Vec::new(), &mut vec![false; y.atom_count()])
}

/// Connected components by breadth-first search over the bond list, optionally ignoring one bond.
pub fn components_without(g: &MolGraph, skip: Option<usize>) -> usize {
    let n = g.atom_count();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (idx, b) in g.bonds().iter().enumerate() {
                if Some(idx) == skip || (b.a != u && b.b != u) {
                    continue;
                }
                let v = if b.a == u { b.b } else { b.a };
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    count
}

fn neighbors_where(g: &MolGraph, i: usize, hydrogen: bool) -> usize {
    g.bonds()
        .iter()
        .filter(|b| b.a == i || b.b == i)
        .filter(|b| (g.atom(if b.a == i { b.b } else { b.a }).element == Element::H) == hydrogen)
        .count()
}

/// Bundled corpus molecules of at most 30 atoms plus a few edge cases.
pub fn oracle_molecules() -> Vec<MolGraph> {
    let mut out: Vec<MolGraph> = reference_smiles()
        .into_iter()
        .map(|s| parse_smiles(s).expect("bundled corpus parses"))
        .filter(|g| g.atom_count() <= MAX_ORACLE_ATOMS)
        .collect();
    for s in [
        "[2H]C([2H])([2H])O",
        "[NH4+].[Cl-]",
        "C1CC2CC1CC2",
        "O=C(N)c1ccc[nH]1",
        "[H]OC([H])=O",
    ] {
        out.push(parse_smiles(s).expect("edge case parses"));
    }
    out
}

/// Corpus entries whose written form does not re-parse to an isomorphic graph.
pub fn roundtrip_failures() -> Vec<String> {
    let mut failures = Vec::new();
    for s in reference_smiles() {
        let Ok(g) = parse_smiles(s) else {
            failures.push(format!("{s}: does not parse"));
            continue;
        };
        let text = write(&g);
        match parse_smiles(&text) {
            Ok(h) if isomorphic(&g, &h) && write(&h) == text => {}
            _ => failures.push(format!("{s} -> {text}")),
        }
    }
    failures
}

pub fn ring_mismatches(molecules: &[MolGraph]) -> Vec<String> {
    molecules
        .iter()
        .filter(|g| g.ring_count() != g.bond_count() + components_without(g, None) - g.atom_count())
        .map(write)
        .collect()
}

pub fn weight_mismatches(molecules: &[MolGraph]) -> Vec<String> {
    molecules
        .iter()
        .filter(|g| {
            let mut total = 0.0;
            for a in g.atoms() {
                let heavy = a.isotope.map_or(a.element.weight(), f64::from);
                total += heavy + f64::from(a.total_h()) * Element::H.weight();
            }
            molecular_weight(g) != total
        })
        .map(write)
        .collect()
}

pub fn charge_mismatches(molecules: &[MolGraph]) -> Vec<String> {
    molecules
        .iter()
        .filter(|g| {
            net_charge(g)
                != g.atoms()
                    .iter()
                    .map(|a| i32::from(a.formal_charge))
                    .sum::<i32>()
        })
        .map(write)
        .collect()
}

pub fn hbond_mismatches(molecules: &[MolGraph]) -> Vec<String> {
    molecules
        .iter()
        .filter(|g| {
            let mut donors = 0;
            let mut acceptors = 0;
            for i in 0..g.atom_count() {
                let a = g.atom(i);
                if matches!(a.element, Element::N | Element::O) {
                    acceptors += 1;
                    if a.total_h() as usize + neighbors_where(g, i, true) > 0 {
                        donors += 1;
                    }
                }
            }
            hba(g) != acceptors || hbd(g) != donors
        })
        .map(write)
        .collect()
}

pub fn rotor_mismatches(molecules: &[MolGraph]) -> Vec<String> {
    molecules
        .iter()
        .filter(|g| {
            let base = components_without(g, None);
            let count = g
                .bonds()
                .iter()
                .enumerate()
                .filter(|&(idx, b)| {
                    b.order == BondOrder::Single
                        && components_without(g, Some(idx)) > base
                        && neighbors_where(g, b.a, false) >= 2
                        && neighbors_where(g, b.b, false) >= 2
                })
                .count() as u32;
            rotatable_bonds(g, &PropertyOptions::default()) != count
        })
        .map(write)
        .collect()
}

/// Every injective map from pattern atoms to graph atoms, filtered only by atom
/// queries, then checked against all pattern bonds.
pub fn exhaustive_match(pattern: &AlertPattern, g: &MolGraph) -> bool {
    fn go(p: &AlertPattern, g: &MolGraph, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        if map.len() == p.atoms.len() {
            return p
                .bonds
                .iter()
                .all(|q| bond_order(g, map[q.a], map[q.b]).is_some_and(|o| q.matches(o)));
        }
        let i = map.len();
        for j in 0..g.atom_count() {
            if used[j] || !p.atoms[i].matches(g, j) {
                continue;
            }
            map.push(j);
            used[j] = true;
            let hit = go(p, g, map, used);
            map.pop();
            used[j] = false;
            if hit {
                return true;
            }
        }
        false
    }
    go(
        pattern,
        g,
        &mut Vec::new(),
        &mut vec![false; g.atom_count()],
    )
}

/// Fifty molecules of at most 12 atoms: hand-picked positives and near misses
/// for every bundled alert, topped up from the bundled corpus.
pub fn alert_suite() -> Vec<MolGraph> {
    let mut molecules: Vec<MolGraph> = [
        "O=[N+]([O-])c1ccccc1",
        "Nc1ccccc1",
        "CCN=O",
        "CN=NC",
        "CC1CO1",
        "CC1CN1",
        "CCCl",
        "ClCC(=O)O",
        "CC(=O)Cl",
        "O=C1C=CC(=O)C=C1",
        "[O-][n+]1ccccc1",
        "ClC=C",
        "Clc1ccccc1",
        "CC(=O)N",
        "O=[N+]([O-])CC",
        "CNc1ccccc1",
        "BrCC1CO1",
        "Ic1ccc(N)cc1",
        "O=C1CCC(=O)C=C1",
        "CC(=O)Br",
    ]
    .iter()
    .map(|s| parse_valid(s).expect("suite molecule is valid"))
    .collect();
    let needed = 50 - molecules.len();
    molecules.extend(
        reference_smiles()
            .into_iter()
            .filter_map(parse_valid)
            .filter(|g| g.atom_count() <= MAX_ALERT_SUITE_ATOMS)
            .take(needed),
    );
    molecules
}

/// Suite pairs where the matcher disagrees with exhaustive enumeration, and the
/// number of positive pairs.
pub fn alert_mismatches() -> (Vec<String>, usize) {
    let mut mismatches = Vec::new();
    let mut positives = 0;
    for g in alert_suite() {
        for a in bundled_alerts() {
            let expected = exhaustive_match(a, &g);
            let embedding_ok = a.find_embedding(&g).is_none_or(|m| {
                a.bonds
                    .iter()
                    .all(|q| bond_order(&g, m[q.a], m[q.b]).is_some_and(|o| q.matches(o)))
            });
            if a.matches(&g) != expected || !embedding_ok {
                mismatches.push(format!("{} on {}", a.id, write(&g)));
            }
            positives += usize::from(expected);
        }
    }
    (mismatches, positives)
}
