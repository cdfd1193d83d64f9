use std::collections::BTreeMap;

use crate::element::Element;
use crate::error::SmilesError;
use crate::graph::{Atom, Bond, BondOrder, MolGraph};
use crate::smiles::token::{Token, TokenKind};

struct PendingBond {
    order: BondOrder,
    /// `:` written explicitly (kept aromatic even outside rings).
    explicit_aromatic: bool,
    position: usize,
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    explicit_aromatic: bool,
}

/// Builds a molecular graph from SMILES tokens. Stereo markers are accepted
/// and dropped. Hydrogens are not assigned here.
pub fn parse(tokens: &[Token<'_>]) -> Result<MolGraph, SmilesError> {
    if tokens.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    // Bonds whose aromaticity was implied rather than written.
    let mut implicit_aromatic: Vec<bool> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<PendingBond> = None;
    // (atom the branch hangs from, position of '(', atoms added since)
    let mut branches: Vec<(usize, usize, bool)> = Vec::new();
    let mut rings: BTreeMap<u16, OpenRing> = BTreeMap::new();

    for tok in tokens {
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    organic_atom(tok.text)
                } else {
                    bracket_atom(tok.text, tok.position)?
                };
                let idx = atoms.len();
                atoms.push(atom);
                if let Some(last) = branches.last_mut() {
                    last.2 = true;
                }
                match (prev, pending.take()) {
                    (Some(p), bond) => {
                        let (order, implied) = resolve_order(&atoms[p], &atoms[idx], bond.as_ref());
                        bonds.push(Bond {
                            a: p,
                            b: idx,
                            order,
                        });
                        implicit_aromatic.push(implied);
                    }
                    (None, Some(bond)) => return Err(SmilesError::DanglingBond(bond.position)),
                    (None, None) => {}
                }
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if pending.is_some() || prev.is_none() {
                    return Err(SmilesError::DanglingBond(tok.position));
                }
                let (order, explicit_aromatic) = match tok.text {
                    "=" => (BondOrder::Double, false),
                    "#" => (BondOrder::Triple, false),
                    ":" => (BondOrder::Aromatic, true),
                    // '-', '/', '\\'
                    _ => (BondOrder::Single, false),
                };
                pending = Some(PendingBond {
                    order,
                    explicit_aromatic,
                    position: tok.position,
                });
            }
            TokenKind::RingClosure => {
                let Some(atom) = prev else {
                    return Err(SmilesError::DanglingBond(tok.position));
                };
                let label: u16 = tok
                    .text
                    .trim_start_matches('%')
                    .parse()
                    .expect("lexer checked digits");
                let bond = pending.take();
                match rings.remove(&label) {
                    None => {
                        rings.insert(
                            label,
                            OpenRing {
                                atom,
                                order: bond.as_ref().map(|b| b.order),
                                explicit_aromatic: bond
                                    .as_ref()
                                    .is_some_and(|b| b.explicit_aromatic),
                            },
                        );
                    }
                    Some(open) => {
                        let written = match (open.order, bond.as_ref().map(|b| b.order)) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(SmilesError::ConflictingRingBond(label))
                            }
                            (Some(a), _) => Some(a),
                            (None, b) => b,
                        };
                        let explicit_aromatic = open.explicit_aromatic
                            || bond.as_ref().is_some_and(|b| b.explicit_aromatic);
                        let (order, implied) = match written {
                            Some(order) => (order, false),
                            None => default_order(&atoms[open.atom], &atoms[atom]),
                        };
                        bonds.push(Bond {
                            a: open.atom,
                            b: atom,
                            order,
                        });
                        implicit_aromatic.push(implied && !explicit_aromatic);
                    }
                }
            }
            TokenKind::BranchOpen => {
                if let Some(bond) = &pending {
                    return Err(SmilesError::DanglingBond(bond.position));
                }
                let Some(atom) = prev else {
                    return Err(SmilesError::UnbalancedBranch(tok.position));
                };
                branches.push((atom, tok.position, false));
            }
            TokenKind::BranchClose => {
                if let Some(bond) = &pending {
                    return Err(SmilesError::DanglingBond(bond.position));
                }
                match branches.pop() {
                    Some((atom, _, true)) => prev = Some(atom),
                    _ => return Err(SmilesError::UnbalancedBranch(tok.position)),
                }
            }
            TokenKind::Dot => {
                if let Some(bond) = &pending {
                    return Err(SmilesError::DanglingBond(bond.position));
                }
                if prev.is_none() || !branches.is_empty() {
                    return Err(SmilesError::UnbalancedBranch(tok.position));
                }
                prev = None;
            }
        }
    }
    if let Some(bond) = pending {
        return Err(SmilesError::DanglingBond(bond.position));
    }
    if let Some(&(_, position, _)) = branches.first() {
        return Err(SmilesError::UnbalancedBranch(position));
    }
    if let Some((&label, _)) = rings.iter().next() {
        return Err(SmilesError::UnclosedRingBond(label));
    }

    let mut graph = MolGraph::new(atoms.clone(), bonds.clone())?;
    // An implied aromatic bond that is not on a ring joins two aromatic systems: single.
    let ring_bonds = graph.ring_bonds();
    let mut changed = false;
    for (i, bond) in bonds.iter_mut().enumerate() {
        if implicit_aromatic[i] && !ring_bonds[i] && bond.order == BondOrder::Aromatic {
            bond.order = BondOrder::Single;
            changed = true;
        }
    }
    if changed {
        graph = MolGraph::new(atoms, bonds)?;
    }
    Ok(graph)
}

fn default_order(a: &Atom, b: &Atom) -> (BondOrder, bool) {
    if a.aromatic && b.aromatic {
        (BondOrder::Aromatic, true)
    } else {
        (BondOrder::Single, false)
    }
}

fn resolve_order(a: &Atom, b: &Atom, bond: Option<&PendingBond>) -> (BondOrder, bool) {
    match bond {
        Some(b) => (b.order, false),
        None => default_order(a, b),
    }
}

fn organic_atom(text: &str) -> Atom {
    let aromatic = text.chars().next().is_some_and(|c| c.is_ascii_lowercase());
    let symbol = if aromatic {
        text.to_ascii_uppercase()
    } else {
        text.to_string()
    };
    let element = Element::from_symbol(&symbol).expect("lexer only emits organic-subset atoms");
    Atom::organic(element, aromatic)
}

/// Parses `[isotope? symbol chirality? hcount? charge? class?]`.
fn bracket_atom(text: &str, position: usize) -> Result<Atom, SmilesError> {
    let bad = || SmilesError::BadBracketAtom(position);
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(bad)?;
    let b = inner.as_bytes();
    let mut i = 0;

    let digits_end = |from: usize| {
        let mut j = from;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        j
    };

    let iso_end = digits_end(i);
    let isotope = if iso_end > i {
        Some(inner[i..iso_end].parse::<u16>().map_err(|_| bad())?)
    } else {
        None
    };
    i = iso_end;

    // Element symbol: aromatic two-letter "se", then uppercase two-letter, then one letter.
    let (element, aromatic) = if inner[i..].starts_with("se") {
        i += 2;
        (Element::Se, true)
    } else {
        let first = *b.get(i).ok_or_else(bad)?;
        if first.is_ascii_lowercase() {
            let sym = (first as char).to_ascii_uppercase().to_string();
            let e = Element::from_symbol(&sym)
                .filter(|e| e.can_be_aromatic())
                .ok_or_else(bad)?;
            i += 1;
            (e, true)
        } else if first.is_ascii_uppercase() {
            let two = b
                .get(i + 1)
                .filter(|c| c.is_ascii_lowercase())
                .and_then(|_| Element::from_symbol(&inner[i..i + 2]));
            match two {
                Some(e) => {
                    i += 2;
                    (e, false)
                }
                None => {
                    let e = Element::from_symbol(&inner[i..i + 1]).ok_or_else(bad)?;
                    i += 1;
                    (e, false)
                }
            }
        } else {
            return Err(bad());
        }
    };

    // Chirality: '@', '@@', or '@' followed by a class tag such as TH1.
    if b.get(i) == Some(&b'@') {
        i += 1;
        if b.get(i) == Some(&b'@') {
            i += 1;
        } else if i + 1 < b.len() && b[i].is_ascii_uppercase() && b[i + 1].is_ascii_uppercase() {
            i += 2;
            i = digits_end(i);
        }
    }

    let mut hcount = 0u8;
    if b.get(i) == Some(&b'H') {
        i += 1;
        let end = digits_end(i);
        hcount = if end > i {
            inner[i..end].parse().map_err(|_| bad())?
        } else {
            1
        };
        i = end;
    }

    let mut charge: i8 = 0;
    if let Some(&sign) = b.get(i).filter(|&&c| c == b'+' || c == b'-') {
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        let end = digits_end(i);
        if end > i {
            let mag: i8 = inner[i..end].parse().map_err(|_| bad())?;
            charge = unit * mag;
            i = end;
        } else {
            charge = unit;
            while b.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }

    if b.get(i) == Some(&b':') {
        let end = digits_end(i + 1);
        if end == i + 1 {
            return Err(bad());
        }
        i = end;
    }

    if i != b.len() {
        return Err(bad());
    }

    Ok(Atom {
        element,
        aromatic,
        formal_charge: charge,
        explicit_h: Some(hcount),
        isotope,
        implicit_h: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::token::tokenize;

    fn p(s: &str) -> Result<MolGraph, SmilesError> {
        parse(&tokenize(s).unwrap())
    }

    #[test]
    fn benzene_graph() {
        let g = p("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_count(), 6);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(g.ring_count(), 1);
    }

    #[test]
    fn unclosed_ring_and_unbalanced_branch() {
        assert_eq!(p("C1CC"), Err(SmilesError::UnclosedRingBond(1)));
        assert_eq!(p("C(C"), Err(SmilesError::UnbalancedBranch(1)));
        assert_eq!(p("CC)C"), Err(SmilesError::UnbalancedBranch(2)));
        assert_eq!(p("C()C"), Err(SmilesError::UnbalancedBranch(2)));
        assert_eq!(p("(C)C"), Err(SmilesError::UnbalancedBranch(0)));
    }

    #[test]
    fn dangling_bonds() {
        assert_eq!(p("C="), Err(SmilesError::DanglingBond(1)));
        assert_eq!(p("=C"), Err(SmilesError::DanglingBond(0)));
        assert_eq!(p("C(=)C"), Err(SmilesError::DanglingBond(2)));
        assert_eq!(p("C=.C"), Err(SmilesError::DanglingBond(1)));
        assert_eq!(p("C==C"), Err(SmilesError::DanglingBond(2)));
    }

    #[test]
    fn ring_bond_orders() {
        let g = p("C=1CCCCC1").unwrap();
        assert_eq!(g.bond_between(0, 5).unwrap().order, BondOrder::Double);
        let g = p("C1CCCCC=1").unwrap();
        assert_eq!(g.bond_between(0, 5).unwrap().order, BondOrder::Double);
        assert_eq!(p("C=1CCCCC#1"), Err(SmilesError::ConflictingRingBond(1)));
        let g = p("C%10CC%10").unwrap();
        assert_eq!(g.ring_count(), 1);
    }

    #[test]
    fn branches_attach_to_the_right_atom() {
        let g = p("CC(=O)O").unwrap();
        assert_eq!(g.bond_between(1, 2).unwrap().order, BondOrder::Double);
        assert_eq!(g.bond_between(1, 3).unwrap().order, BondOrder::Single);
        let g = p("C(C)(C)(C)C").unwrap();
        assert_eq!(g.degree(0), 4);
    }

    #[test]
    fn bracket_atoms() {
        let g = p("[NH4+]").unwrap();
        let a = g.atom(0);
        assert_eq!(
            (a.element, a.formal_charge, a.explicit_h),
            (Element::N, 1, Some(4))
        );
        let g = p("[13CH3:2][O-]").unwrap();
        assert_eq!(g.atom(0).isotope, Some(13));
        assert_eq!(g.atom(1).formal_charge, -1);
        let g = p("[C@@H](F)(Cl)Br").unwrap();
        assert_eq!(g.atom(0).explicit_h, Some(1));
        let g = p("[Fe++]").map(|_| ()).unwrap_err();
        assert_eq!(g, SmilesError::BadBracketAtom(0));
        assert_eq!(p("[O--]").unwrap().atom(0).formal_charge, -2);
        assert!(p("[nH]1cccc1").unwrap().atom(0).aromatic);
        assert_eq!(p("[se]1cccc1").unwrap().atom(0).element, Element::Se);
        assert_eq!(p("[Na+].[Cl-]").unwrap().component_count(), 2);
    }

    #[test]
    fn stereo_bonds_become_single() {
        let g = p("F/C=C/F").unwrap();
        assert_eq!(g.bond_between(0, 1).unwrap().order, BondOrder::Single);
        assert_eq!(g.bond_between(1, 2).unwrap().order, BondOrder::Double);
    }

    #[test]
    fn implied_bond_between_aromatic_rings_is_single() {
        let g = p("c1ccccc1c1ccccc1").unwrap();
        assert_eq!(g.bond_between(5, 6).unwrap().order, BondOrder::Single);
        let g = p("c1ccccc1:c1ccccc1").unwrap();
        assert_eq!(g.bond_between(5, 6).unwrap().order, BondOrder::Aromatic);
    }

    #[test]
    fn ring_bond_to_self_or_duplicate_is_rejected() {
        assert!(matches!(p("C11"), Err(SmilesError::Graph(_))));
        assert!(matches!(p("C12CCC12"), Err(SmilesError::Graph(_))));
    }
}
