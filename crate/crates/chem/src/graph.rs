use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to valence accounting; aromatic bonds count 1.5.
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    /// Small integer code used in hashes and sort keys.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket atom; `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    /// Filled by [`MolGraph::assign_implicit_hydrogens`].
    pub implicit_h: u8,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Self {
        Atom {
            element,
            aromatic,
            formal_charge: 0,
            explicit_h: None,
            isotope: None,
            implicit_h: 0,
        }
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }

    pub fn total_h(&self) -> u8 {
        self.explicit_h.unwrap_or(self.implicit_h)
    }

    pub fn mass(&self) -> f64 {
        match self.isotope {
            Some(iso) => iso as f64,
            None => self.element.weight(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Attributed molecular graph. Hydrogens are implicit counts on heavy atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index), in bond insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
    component: Vec<usize>,
    n_components: usize,
}

impl MolGraph {
    /// Builds a graph, checking bond endpoints and duplicates. Hydrogen counts
    /// are left as given; call [`MolGraph::assign_implicit_hydrogens`] afterwards.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (idx, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n {
                return Err(GraphError::BadEndpoint(idx));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(bond.a));
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, idx));
            adjacency[bond.b].push((bond.a, idx));
        }
        let mut component = vec![usize::MAX; n];
        let mut n_components = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            component[start] = n_components;
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adjacency[u] {
                    if component[v] == usize::MAX {
                        component[v] = n_components;
                        queue.push_back(v);
                    }
                }
            }
            n_components += 1;
        }
        Ok(MolGraph {
            atoms,
            bonds,
            adjacency,
            component,
            n_components,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Component label of each atom (dot-separated fragments).
    pub fn components(&self) -> &[usize] {
        &self.component
    }

    pub fn component_count(&self) -> usize {
        self.n_components
    }

    /// (neighbor, bond index) pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, idx)| &self.bonds[idx])
    }

    /// Sum of bond valence contributions at atom `i` (aromatic = 1.5).
    pub fn bond_valence_sum(&self, i: usize) -> f64 {
        self.adjacency[i]
            .iter()
            .map(|&(_, idx)| self.bonds[idx].order.valence())
            .sum()
    }

    /// Cycle rank: bonds - atoms + components.
    pub fn ring_count(&self) -> usize {
        self.bonds.len() + self.n_components - self.atoms.len()
    }

    pub fn heavy_mass_with_h(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass() + a.total_h() as f64 * Element::H.weight())
            .sum()
    }

    /// Marks every bond that lies on a cycle (i.e. is not a bridge).
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // Iterative DFS: (node, parent bond, next neighbor cursor)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, parent_bond, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[u].len() {
                    let (v, bidx) = self.adjacency[u][*cursor];
                    *cursor += 1;
                    if bidx == parent_bond {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bidx, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            is_bridge[parent_bond] = true;
                        }
                    }
                }
            }
        }
        is_bridge.into_iter().map(|b| !b).collect()
    }

    /// Atoms that belong to at least one ring.
    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring_bonds = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (bond, &in_ring) in self.bonds.iter().zip(&ring_bonds) {
            if in_ring {
                out[bond.a] = true;
                out[bond.b] = true;
            }
        }
        out
    }

    /// Size of the smallest cycle through each ring bond (`None` for bridges).
    pub fn smallest_ring_per_bond(&self) -> Vec<Option<usize>> {
        let ring_bonds = self.ring_bonds();
        let n = self.atoms.len();
        self.bonds
            .iter()
            .enumerate()
            .map(|(idx, bond)| {
                if !ring_bonds[idx] {
                    return None;
                }
                // Shortest path a -> b avoiding this bond.
                let mut dist = vec![usize::MAX; n];
                dist[bond.a] = 0;
                let mut queue = VecDeque::from([bond.a]);
                while let Some(u) = queue.pop_front() {
                    if u == bond.b {
                        break;
                    }
                    for &(v, bidx) in &self.adjacency[u] {
                        if bidx != idx && dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                Some(dist[bond.b] + 1)
            })
            .collect()
    }

    /// Hydrogen count atom `i` would receive if written in organic-subset form.
    pub fn default_implicit_h(&self, i: usize) -> u8 {
        let table = crate::valence::ValenceTable::bundled();
        let sum = self.bond_valence_sum(i);
        let atom = &self.atoms[i];
        if atom.aromatic {
            let target = table.aromatic_default(atom.element) as f64;
            (target - sum).floor().max(0.0) as u8
        } else {
            let bond_sum = sum.round() as u32;
            table
                .valences(atom.element, 0)
                .and_then(|vals| vals.iter().copied().find(|&v| v as u32 >= bond_sum))
                .map(|v| (v as u32 - bond_sum) as u8)
                .unwrap_or(0)
        }
    }

    /// Computes implicit hydrogens for organic-subset atoms from the default
    /// valence table. Bracket atoms keep their written hydrogen count.
    pub fn assign_implicit_hydrogens(&mut self) {
        for i in 0..self.atoms.len() {
            self.atoms[i].implicit_h = if self.atoms[i].is_bracket() {
                0
            } else {
                self.default_implicit_h(i)
            };
        }
    }

    /// Relabels atoms: atom `i` of `self` becomes atom `perm[i]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![self.atoms[0].clone(); self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = atom.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        MolGraph::new(atoms, bonds).expect("permutation preserves validity")
    }

    /// Disjoint union of two graphs.
    pub fn union(&self, other: &MolGraph) -> MolGraph {
        let offset = self.atoms.len();
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let mut bonds = self.bonds.clone();
        bonds.extend(other.bonds.iter().map(|b| Bond {
            a: b.a + offset,
            b: b.b + offset,
            order: b.order,
        }));
        MolGraph::new(atoms, bonds).expect("union of valid graphs")
    }

    /// Copy of the graph with one extra bond. Hydrogen counts are not updated.
    pub fn with_bond(&self, a: usize, b: usize, order: BondOrder) -> Result<MolGraph, GraphError> {
        let mut bonds = self.bonds.clone();
        bonds.push(Bond { a, b, order });
        MolGraph::new(self.atoms.clone(), bonds)
    }

    /// Number of non-hydrogen neighbors of atom `i`.
    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i]
            .iter()
            .filter(|&&(nb, _)| self.atoms[nb].element != Element::H)
            .count()
    }

    /// Hydrogens on atom `i`, counting implicit/bracket H and explicit H atoms.
    pub fn hydrogen_count(&self, i: usize) -> usize {
        self.atoms[i].total_h() as usize + self.degree(i) - self.heavy_degree(i)
    }

    /// Splits the graph into one graph per component, preserving atom order.
    pub fn split_components(&self) -> Vec<MolGraph> {
        (0..self.n_components)
            .map(|c| {
                let members: Vec<usize> = (0..self.atoms.len())
                    .filter(|&i| self.component[i] == c)
                    .collect();
                let mut index = vec![usize::MAX; self.atoms.len()];
                for (new, &old) in members.iter().enumerate() {
                    index[old] = new;
                }
                let atoms = members.iter().map(|&i| self.atoms[i].clone()).collect();
                let bonds = self
                    .bonds
                    .iter()
                    .filter(|b| self.component[b.a] == c)
                    .map(|b| Bond {
                        a: index[b.a],
                        b: index[b.b],
                        order: b.order,
                    })
                    .collect();
                MolGraph::new(atoms, bonds).expect("component of a valid graph")
            })
            .collect()
    }
}
