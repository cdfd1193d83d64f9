use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::graph::{Atom, BondOrder, MolGraph};

/// Morgan-style ranks: iterative refinement of an atom invariant by sorted
/// neighbor ranks. When refinement stalls with ties, the lowest-index atom of
/// the first tied class is split off and refinement resumes, so the result is
/// a permutation of `0..n`.
pub fn morgan_ranks(graph: &MolGraph) -> Vec<usize> {
    let n = graph.atom_count();
    let invariants: Vec<_> = (0..n)
        .map(|i| {
            let a = graph.atom(i);
            (
                graph.degree(i),
                a.element.atomic_number(),
                a.aromatic,
                a.formal_charge,
                a.total_h(),
                a.isotope.unwrap_or(0),
            )
        })
        .collect();
    let mut classes = refine(graph, dense_rank(&invariants));
    while count_classes(&classes) < n {
        let mut seen = vec![0usize; n];
        for &c in &classes {
            seen[c] += 1;
        }
        let tied = (0..n).find(|&c| seen[c] > 1).expect("a tied class exists");
        let pick = (0..n)
            .find(|&i| classes[i] == tied)
            .expect("class is populated");
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (classes[i], i != pick)).collect();
        classes = refine(graph, dense_rank(&keys));
    }
    classes
}

fn refine(graph: &MolGraph, mut classes: Vec<usize>) -> Vec<usize> {
    let n = graph.atom_count();
    let mut n_classes = count_classes(&classes);
    loop {
        let refined: Vec<(usize, Vec<(usize, u8)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(v, b)| (classes[v], graph.bonds()[b].order.code()))
                    .collect();
                nb.sort_unstable();
                (classes[i], nb)
            })
            .collect();
        classes = dense_rank(&refined);
        let next_count = count_classes(&classes);
        if next_count == n_classes {
            return classes;
        }
        n_classes = next_count;
    }
}

fn dense_rank<T: Ord + Clone>(keys: &[T]) -> Vec<usize> {
    let sorted: BTreeSet<T> = keys.iter().cloned().collect();
    let sorted: Vec<T> = sorted.into_iter().collect();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn count_classes(classes: &[usize]) -> usize {
    classes.iter().collect::<BTreeSet<_>>().len()
}

/// Serializes a graph to SMILES. Output is deterministic for a given graph;
/// components are written separately and joined in lexicographic order.
pub fn write(graph: &MolGraph) -> String {
    if graph.is_empty() {
        return String::new();
    }
    let ranks = morgan_ranks(graph);
    let mut writer = Writer::new(graph, &ranks);
    let mut parts = Vec::new();
    for comp in 0..graph.component_count() {
        let start = (0..graph.atom_count())
            .filter(|&i| graph.components()[i] == comp)
            .min_by_key(|&i| ranks[i])
            .expect("components are non-empty");
        parts.push(writer.component(start));
    }
    parts.sort();
    parts.join(".")
}

struct Writer<'g> {
    graph: &'g MolGraph,
    ranks: &'g [usize],
    visited: Vec<bool>,
    emitted: Vec<bool>,
    /// Tree children of each atom, in visiting order.
    children: Vec<Vec<(usize, usize)>>,
    /// Ring closure bonds per atom, in the order they are written at that atom.
    closures: Vec<Vec<usize>>,
    is_closure: Vec<bool>,
    /// Digit currently assigned to each open closure bond.
    digit_of: Vec<Option<u16>>,
    free: BTreeSet<u16>,
}

impl<'g> Writer<'g> {
    fn new(graph: &'g MolGraph, ranks: &'g [usize]) -> Self {
        Writer {
            graph,
            ranks,
            visited: vec![false; graph.atom_count()],
            emitted: vec![false; graph.atom_count()],
            children: vec![Vec::new(); graph.atom_count()],
            closures: vec![Vec::new(); graph.atom_count()],
            is_closure: vec![false; graph.bond_count()],
            digit_of: vec![None; graph.bond_count()],
            free: (1..=99).collect(),
        }
    }

    fn sorted_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nb = self.graph.neighbors(u).to_vec();
        nb.sort_by_key(|&(v, _)| self.ranks[v]);
        nb
    }

    fn component(&mut self, start: usize) -> String {
        self.discover(start, None);
        let mut out = String::new();
        self.emit(start, &mut out);
        out
    }

    fn discover(&mut self, u: usize, parent_bond: Option<usize>) {
        self.visited[u] = true;
        for (v, b) in self.sorted_neighbors(u) {
            if Some(b) == parent_bond || self.is_closure[b] {
                continue;
            }
            if self.visited[v] {
                // Back edge to an ancestor: ring closure opened at v, closed at u.
                self.is_closure[b] = true;
                self.closures[v].push(b);
                self.closures[u].push(b);
            } else {
                self.children[u].push((v, b));
                self.discover(v, Some(b));
            }
        }
    }

    fn emit(&mut self, u: usize, out: &mut String) {
        out.push_str(&atom_text(self.graph, u));
        self.emitted[u] = true;
        let closures = self.closures[u].clone();
        // Close pending rings first so their digits can be reused.
        for &b in &closures {
            if let Some(d) = self.digit_of[b] {
                push_digit(out, d);
                self.free.insert(d);
                self.digit_of[b] = None;
            }
        }
        for &b in &closures {
            if !self.emitted[self.graph.bonds()[b].other(u)] {
                let d = self.free.pop_first().expect("fewer than 100 open rings");
                let bond = &self.graph.bonds()[b];
                out.push_str(bond_text(self.graph, bond.a, bond.b, bond.order));
                push_digit(out, d);
                self.digit_of[b] = Some(d);
            }
        }
        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (k, &(v, b)) in children.iter().enumerate() {
            let order = self.graph.bonds()[b].order;
            if k < last {
                out.push('(');
            }
            out.push_str(bond_text(self.graph, u, v, order));
            self.emit(v, out);
            if k < last {
                out.push(')');
            }
        }
    }
}

fn push_digit(out: &mut String, d: u16) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d}");
    }
}

fn bond_text(graph: &MolGraph, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = graph.atom(a).aromatic && graph.atom(b).aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn organic_writable(graph: &MolGraph, i: usize) -> bool {
    let a: &Atom = graph.atom(i);
    let aromatic_ok =
        !a.aromatic || matches!(a.element.symbol(), "B" | "C" | "N" | "O" | "P" | "S");
    a.element.is_organic_subset()
        && aromatic_ok
        && a.formal_charge == 0
        && a.isotope.is_none()
        && a.total_h() == graph.default_implicit_h(i)
}

fn atom_text(graph: &MolGraph, i: usize) -> String {
    let a = graph.atom(i);
    let symbol = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    if organic_writable(graph, i) {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(&symbol);
    match a.total_h() {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "+{c}");
        }
        c => {
            let _ = write!(s, "-{}", -c);
        }
    }
    s.push(']');
    s
}
