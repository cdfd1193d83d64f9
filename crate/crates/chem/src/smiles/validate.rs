use std::fmt;

use crate::element::Element;
use crate::graph::{BondOrder, MolGraph};
use crate::valence::ValenceTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureReason {
    /// Parsing failed; the location is a byte offset into the SMILES text.
    Syntax,
    ValenceExceeded,
    UnsupportedCharge,
    AromaticAtomOutsideRing,
    AromaticBondOutsideRing,
    AromaticBondOnAliphaticAtom,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureReason::Syntax => "syntax error",
            FailureReason::ValenceExceeded => "valence exceeded",
            FailureReason::UnsupportedCharge => "unsupported charge state",
            FailureReason::AromaticAtomOutsideRing => "aromatic atom outside a ring",
            FailureReason::AromaticBondOutsideRing => "aromatic bond outside a ring",
            FailureReason::AromaticBondOnAliphaticAtom => "aromatic bond on an aliphatic atom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Atom(usize),
    Bond(usize),
    Position(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure {
    pub location: Location,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    pub failures: Vec<Failure>,
}

impl ValidityReport {
    fn from_failures(failures: Vec<Failure>) -> Self {
        ValidityReport {
            valid: failures.is_empty(),
            failures,
        }
    }

    pub fn syntax(position: usize) -> Self {
        Self::from_failures(vec![Failure {
            location: Location::Position(position),
            reason: FailureReason::Syntax,
        }])
    }
}

const MAX_ABS_CHARGE: i8 = 3;

/// Checks valence, aromaticity and charge rules. Expects hydrogens assigned.
///
/// Aromatic atoms are checked with integer Kekulé bounds: with `a` aromatic
/// bonds, other bond orders `o` and `h` hydrogens, either `a + o + h` or
/// `a + o + h + 1` (one ring double bond) must be an allowed valence; neutral
/// aromatic carbon without an exocyclic double bond needs the latter.
pub fn validate(graph: &MolGraph) -> ValidityReport {
    let table = ValenceTable::bundled();
    let ring_bonds = graph.ring_bonds();
    let ring_atoms = graph.ring_atoms();
    let mut failures = Vec::new();
    let mut fail = |location, reason| failures.push(Failure { location, reason });

    for (i, atom) in graph.atoms().iter().enumerate() {
        let loc = Location::Atom(i);
        let allowed = match table.valences(atom.element, atom.formal_charge) {
            Some(v) if atom.formal_charge.abs() <= MAX_ABS_CHARGE => v,
            _ => {
                fail(loc, FailureReason::UnsupportedCharge);
                continue;
            }
        };
        let max = *allowed.last().expect("non-empty valence list") as u32;
        let h = atom.total_h() as u32;
        if atom.aromatic {
            if !ring_atoms[i] {
                fail(loc, FailureReason::AromaticAtomOutsideRing);
            }
            let mut low = h;
            let mut has_double = false;
            for &(_, bidx) in graph.neighbors(i) {
                low += match graph.bonds()[bidx].order {
                    BondOrder::Aromatic | BondOrder::Single => 1,
                    BondOrder::Double => {
                        has_double = true;
                        2
                    }
                    BondOrder::Triple => 3,
                };
            }
            // A neutral aromatic carbon has no lone pair to donate, so it must
            // take a ring double bond unless it already carries one exocyclic.
            let needs_pi = atom.element == Element::C && atom.formal_charge == 0 && !has_double;
            let ok = allowed
                .iter()
                .any(|&v| v as u32 == low + 1 || (!needs_pi && v as u32 == low));
            if !ok {
                fail(loc, FailureReason::ValenceExceeded);
            }
        } else {
            let mut total = h;
            for &(_, bidx) in graph.neighbors(i) {
                total += match graph.bonds()[bidx].order {
                    BondOrder::Single => 1,
                    BondOrder::Double => 2,
                    BondOrder::Triple => 3,
                    // Flagged separately below; count conservatively.
                    BondOrder::Aromatic => 1,
                };
            }
            let min = allowed[0] as u32;
            let ok = total <= min || (total <= max && allowed.iter().any(|&v| v as u32 == total));
            if !ok {
                fail(loc, FailureReason::ValenceExceeded);
            }
        }
    }

    for (idx, bond) in graph.bonds().iter().enumerate() {
        if bond.order != BondOrder::Aromatic {
            continue;
        }
        if !graph.atom(bond.a).aromatic || !graph.atom(bond.b).aromatic {
            fail(
                Location::Bond(idx),
                FailureReason::AromaticBondOnAliphaticAtom,
            );
        }
        if !ring_bonds[idx] {
            fail(Location::Bond(idx), FailureReason::AromaticBondOutsideRing);
        }
    }

    ValidityReport::from_failures(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn report(s: &str) -> ValidityReport {
        validate(&parse_smiles(s).unwrap())
    }

    #[test]
    fn common_molecules_are_valid() {
        for s in [
            "c1ccccc1",
            "c1ccc2ccccc2c1",
            "c1ccncc1",
            "c1cc[nH]c1",
            "c1ccoc1",
            "c1ccsc1",
            "O=c1cccc[nH]1",
            "C[n+]1ccccc1",
            "[NH4+]",
            "CC(=O)[O-]",
            "C[N+](=O)[O-]",
            "CN(=O)=O",
            "CS(=O)(=O)C",
            "[Na+].[Cl-]",
            "C#N",
            "[CH2]",
            "c1ccc2c(c1)[nH]c1ccccc12",
        ] {
            let r = report(s);
            assert!(r.valid, "{s}: {:?}", r.failures);
        }
    }

    #[test]
    fn pentavalent_carbon_is_invalid() {
        let r = report("C(C)(C)(C)(C)C");
        assert!(!r.valid);
        assert_eq!(
            r.failures,
            vec![Failure {
                location: Location::Atom(0),
                reason: FailureReason::ValenceExceeded
            }]
        );
    }

    #[test]
    fn other_valence_failures() {
        assert!(!report("C=C=C=C(=C)C").valid);
        assert!(!report("O=O=O").valid);
        assert!(!report("C[N](C)(C)C").valid);
        assert!(!report("FC(F)(F)(F)F").valid);
        assert!(!report("c1ccccc1(C)C").valid);
    }

    #[test]
    fn aromatic_outside_ring_is_invalid() {
        let r = report("cc");
        assert!(!r.valid);
        assert!(r
            .failures
            .iter()
            .any(|f| f.reason == FailureReason::AromaticAtomOutsideRing));
        let r = report("C1:C:C:C:C:C1");
        assert!(r
            .failures
            .iter()
            .any(|f| f.reason == FailureReason::AromaticBondOnAliphaticAtom));
        let r = report("c1ccccc1:c1ccccc1");
        assert!(r
            .failures
            .iter()
            .any(|f| f.reason == FailureReason::AromaticBondOutsideRing));
    }

    #[test]
    fn unsupported_charges() {
        assert!(!report("[C+4]").valid);
        assert!(report("[NH4+]").valid);
        assert!(!report("[O+5]").valid);
    }
}
