use serde::{Deserialize, Serialize};

use crate::chemprops::tables::{LogPTable, TpsaKey, TpsaTable};
use crate::element::Element;
use crate::error::PropertyError;
use crate::graph::{BondOrder, MolGraph};

/// The eight content properties preserved during transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyVector {
    pub mw: f64,
    pub logp: f64,
    pub hba: u32,
    pub hbd: u32,
    pub rot_bonds: u32,
    pub rings: u32,
    pub net_charge: i32,
    pub tpsa: f64,
}

impl PropertyVector {
    pub const NAMES: [&'static str; 8] =
        ["mw", "logp", "hba", "hbd", "rot", "rings", "charge", "tpsa"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.mw,
            self.logp,
            self.hba as f64,
            self.hbd as f64,
            self.rot_bonds as f64,
            self.rings as f64,
            self.net_charge as f64,
            self.tpsa,
        ]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyOptions {
    /// Skip C(=O)-N bonds when counting rotatable bonds.
    pub exclude_amide_rotors: bool,
}

pub fn content_properties(graph: &MolGraph) -> Result<PropertyVector, PropertyError> {
    content_properties_with(graph, &PropertyOptions::default())
}

pub fn content_properties_with(
    graph: &MolGraph,
    options: &PropertyOptions,
) -> Result<PropertyVector, PropertyError> {
    Ok(PropertyVector {
        mw: molecular_weight(graph),
        logp: logp(graph)?,
        hba: hba(graph),
        hbd: hbd(graph),
        rot_bonds: rotatable_bonds(graph, options),
        rings: graph.ring_count() as u32,
        net_charge: net_charge(graph),
        tpsa: tpsa(graph),
    })
}

pub fn molecular_weight(graph: &MolGraph) -> f64 {
    graph.heavy_mass_with_h()
}

pub fn net_charge(graph: &MolGraph) -> i32 {
    graph.atoms().iter().map(|a| a.formal_charge as i32).sum()
}

fn is_n_or_o(e: Element) -> bool {
    matches!(e, Element::N | Element::O)
}

pub fn hba(graph: &MolGraph) -> u32 {
    graph
        .atoms()
        .iter()
        .filter(|a| is_n_or_o(a.element))
        .count() as u32
}

pub fn hbd(graph: &MolGraph) -> u32 {
    (0..graph.atom_count())
        .filter(|&i| is_n_or_o(graph.atom(i).element) && graph.hydrogen_count(i) > 0)
        .count() as u32
}

pub fn rotatable_bonds(graph: &MolGraph, options: &PropertyOptions) -> u32 {
    let ring = graph.ring_bonds();
    graph
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(idx, b)| {
            b.order == BondOrder::Single
                && !ring[idx]
                && graph.heavy_degree(b.a) >= 2
                && graph.heavy_degree(b.b) >= 2
                && !(options.exclude_amide_rotors && is_amide(graph, b.a, b.b))
        })
        .count() as u32
}

fn is_amide(graph: &MolGraph, a: usize, b: usize) -> bool {
    let carbonyl = |c: usize| {
        graph.atom(c).element == Element::C
            && graph.neighbors(c).iter().any(|&(o, bidx)| {
                graph.atom(o).element == Element::O
                    && graph.bonds()[bidx].order == BondOrder::Double
            })
    };
    let nitrogen = |n: usize| graph.atom(n).element == Element::N;
    (carbonyl(a) && nitrogen(b)) || (carbonyl(b) && nitrogen(a))
}

pub fn logp(graph: &MolGraph) -> Result<f64, PropertyError> {
    let table = LogPTable::bundled();
    let mut total = 0.0;
    for (i, atom) in graph.atoms().iter().enumerate() {
        let hetero = graph
            .neighbors(i)
            .iter()
            .filter(|&&(v, _)| !matches!(graph.atom(v).element, Element::C | Element::H))
            .count();
        let (heavy, per_h) = table
            .lookup(atom.element, atom.aromatic, hetero)
            .ok_or(PropertyError::UnsupportedElement(atom.element))?;
        total += heavy + per_h * atom.total_h() as f64;
        if atom.formal_charge != 0 {
            total += table.charge_penalty;
        }
    }
    Ok(total)
}

/// Polar surface area over N and O environments of the bundled table.
pub fn tpsa(graph: &MolGraph) -> f64 {
    let table = TpsaTable::bundled();
    let mut total = 0.0;
    for (i, atom) in graph.atoms().iter().enumerate() {
        if !is_n_or_o(atom.element) {
            continue;
        }
        let key = tpsa_key(graph, i);
        match table.get(&key) {
            Some(v) => total += v,
            None => log::warn!("no polar surface entry for {key:?}; contributing 0"),
        }
    }
    total
}

pub fn tpsa_key(graph: &MolGraph, i: usize) -> TpsaKey {
    let atom = graph.atom(i);
    let (mut single, mut double, mut triple, mut aromatic) = (0u8, 0u8, 0u8, 0u8);
    for &(v, bidx) in graph.neighbors(i) {
        if graph.atom(v).element == Element::H {
            continue;
        }
        match graph.bonds()[bidx].order {
            BondOrder::Single => single += 1,
            BondOrder::Double => double += 1,
            BondOrder::Triple => triple += 1,
            BondOrder::Aromatic => aromatic += 1,
        }
    }
    TpsaKey {
        element: atom.element,
        aromatic: atom.aromatic,
        charge: atom.formal_charge,
        hydrogens: graph.hydrogen_count(i) as u8,
        single,
        double,
        triple,
        aromatic_bonds: aromatic,
    }
}
