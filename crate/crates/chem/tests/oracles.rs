mod support;

use molxfer_chem::chemprops::{
    bundled_alerts, content_properties, hba, molecular_weight, reference_smiles,
};

use support::*;

#[test]
fn bundled_corpus_roundtrips_to_isomorphic_graphs() {
    assert_eq!(reference_smiles().len(), 500);
    assert_eq!(roundtrip_failures(), Vec::<String>::new());
}

#[test]
fn ring_count_equals_cycle_rank() {
    assert_eq!(ring_mismatches(&oracle_molecules()), Vec::<String>::new());
}

#[test]
fn molecular_weight_equals_atomic_weight_sum() {
    assert_eq!(weight_mismatches(&oracle_molecules()), Vec::<String>::new());
}

#[test]
fn net_charge_equals_formal_charge_sum() {
    assert_eq!(charge_mismatches(&oracle_molecules()), Vec::<String>::new());
}

#[test]
fn donor_and_acceptor_counts_match_atom_classification() {
    assert_eq!(hbond_mismatches(&oracle_molecules()), Vec::<String>::new());
}

#[test]
fn rotatable_bonds_match_exhaustive_bond_classification() {
    assert_eq!(rotor_mismatches(&oracle_molecules()), Vec::<String>::new());
}

#[test]
fn oracle_set_covers_most_of_the_corpus() {
    assert!(oracle_molecules().len() >= 450);
}

#[test]
fn content_properties_agree_with_individual_calculators() {
    for g in oracle_molecules()
        .iter()
        .filter(|g| g.component_count() == 1)
    {
        let Ok(p) = content_properties(g) else {
            continue;
        };
        assert_eq!(p.rings as usize, g.ring_count());
        assert_eq!(p.hba, hba(g));
        assert_eq!(p.mw, molecular_weight(g));
    }
}

#[test]
fn alert_matcher_equals_exhaustive_enumeration() {
    assert_eq!(bundled_alerts().len(), 10);
    assert_eq!(alert_suite().len(), 50);
    assert!(alert_suite()
        .iter()
        .all(|g| g.atom_count() <= MAX_ALERT_SUITE_ATOMS));
    let (mismatches, positives) = alert_mismatches();
    assert_eq!(mismatches, Vec::<String>::new());
    assert!(positives >= 10, "{positives}");
}

#[test]
fn isomorphism_oracle_distinguishes_isomers() {
    use molxfer_chem::smiles::parse_smiles;
    let a = parse_smiles("CCO").unwrap();
    let b = parse_smiles("OCC").unwrap();
    let c = parse_smiles("COC").unwrap();
    assert!(isomorphic(&a, &b));
    assert!(!isomorphic(&a, &c));
}
