//! Structural alert patterns and a backtracking substructure matcher.

use std::sync::OnceLock;

use crate::element::Element;
use crate::error::TableError;
use crate::graph::{BondOrder, MolGraph};

const BUNDLED: &str = include_str!("../../data/alerts.txt");
pub const MAX_PATTERN_ATOMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomQuery {
    pub elements: Vec<Element>,
    pub aromatic: Option<bool>,
    pub charge: Option<i8>,
    pub hydrogens: Option<u8>,
    pub heavy_degree: Option<u8>,
    pub saturated: bool,
}

impl AtomQuery {
    pub fn matches(&self, graph: &MolGraph, i: usize) -> bool {
        let a = graph.atom(i);
        self.elements.contains(&a.element)
            && self.aromatic.is_none_or(|ar| ar == a.aromatic)
            && self.charge.is_none_or(|q| q == a.formal_charge)
            && self
                .hydrogens
                .is_none_or(|h| h as usize == graph.hydrogen_count(i))
            && self
                .heavy_degree
                .is_none_or(|d| d as usize == graph.heavy_degree(i))
            && (!self.saturated
                || graph
                    .neighbors(i)
                    .iter()
                    .all(|&(_, b)| graph.bonds()[b].order == BondOrder::Single))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BondQuery {
    pub a: usize,
    pub b: usize,
    /// `None` matches any order.
    pub order: Option<BondOrder>,
}

impl BondQuery {
    pub fn matches(&self, order: BondOrder) -> bool {
        self.order.is_none_or(|o| o == order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlertPattern {
    pub id: String,
    pub name: String,
    pub atoms: Vec<AtomQuery>,
    pub bonds: Vec<BondQuery>,
}

impl AlertPattern {
    fn check(&self) -> Result<(), String> {
        let n = self.atoms.len();
        if n == 0 || n > MAX_PATTERN_ATOMS {
            return Err(format!(
                "{}: pattern must have 1..={MAX_PATTERN_ATOMS} atoms",
                self.id
            ));
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for b in &self.bonds {
                if b.a >= n || b.b >= n || b.a == b.b {
                    return Err(format!("{}: bad bond {}-{}", self.id, b.a, b.b));
                }
                if seen[b.a] != seen[b.b] {
                    seen[b.a] = true;
                    seen[b.b] = true;
                    changed = true;
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(format!("{}: pattern is disconnected", self.id));
        }
        Ok(())
    }

    /// First embedding found, as pattern atom -> graph atom.
    pub fn find_embedding(&self, graph: &MolGraph) -> Option<Vec<usize>> {
        let order = self.search_order();
        let mut mapping = vec![usize::MAX; self.atoms.len()];
        let mut used = vec![false; graph.atom_count()];
        if self.extend(graph, &order, 0, &mut mapping, &mut used) {
            Some(mapping)
        } else {
            None
        }
    }

    pub fn matches(&self, graph: &MolGraph) -> bool {
        self.find_embedding(graph).is_some()
    }

    /// Breadth-first order so every atom after the first has a mapped neighbor.
    fn search_order(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut order = vec![0];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for b in &self.bonds {
                let v = if b.a == u {
                    b.b
                } else if b.b == u {
                    b.a
                } else {
                    continue;
                };
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
        order
    }

    fn extend(
        &self,
        graph: &MolGraph,
        order: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let p = order[depth];
        // Candidates: neighbors of an already mapped partner, or every atom for the root.
        let anchor = self.bonds.iter().find_map(|b| {
            if b.a == p && mapping[b.b] != usize::MAX {
                Some(mapping[b.b])
            } else if b.b == p && mapping[b.a] != usize::MAX {
                Some(mapping[b.a])
            } else {
                None
            }
        });
        let candidates: Vec<usize> = match anchor {
            Some(g) => graph.neighbors(g).iter().map(|&(v, _)| v).collect(),
            None => (0..graph.atom_count()).collect(),
        };
        for g in candidates {
            if used[g] || !self.atoms[p].matches(graph, g) {
                continue;
            }
            let bonds_ok = self.bonds.iter().all(|b| {
                let other = if b.a == p {
                    b.b
                } else if b.b == p {
                    b.a
                } else {
                    return true;
                };
                if mapping[other] == usize::MAX {
                    return true;
                }
                graph
                    .bond_between(g, mapping[other])
                    .is_some_and(|gb| b.matches(gb.order))
            });
            if !bonds_ok {
                continue;
            }
            mapping[p] = g;
            used[g] = true;
            if self.extend(graph, order, depth + 1, mapping, used) {
                return true;
            }
            mapping[p] = usize::MAX;
            used[g] = false;
        }
        false
    }
}

/// Parses the `id | name | atoms | bonds` alert format.
pub fn parse_alerts(text: &str) -> Result<Vec<AlertPattern>, TableError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || TableError::BadLine {
            table: "alerts",
            line: lineno + 1,
        };
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        if fields.len() != 4 || fields[0].is_empty() {
            return Err(bad());
        }
        let atoms = fields[2]
            .split(';')
            .map(|s| parse_atom(s.trim()).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()?;
        let bonds = if fields[3].is_empty() {
            Vec::new()
        } else {
            fields[3]
                .split(';')
                .map(|s| parse_bond(s.trim()).ok_or_else(bad))
                .collect::<Result<Vec<_>, _>>()?
        };
        let pattern = AlertPattern {
            id: fields[0].to_string(),
            name: fields[1].to_string(),
            atoms,
            bonds,
        };
        pattern.check().map_err(|message| TableError::Invalid {
            table: "alerts",
            message,
        })?;
        out.push(pattern);
    }
    Ok(out)
}

fn parse_atom(spec: &str) -> Option<AtomQuery> {
    let (elements, flags) = match spec.split_once(':') {
        Some((e, f)) => (e, f),
        None => (spec, ""),
    };
    let elements = elements
        .split('/')
        .map(Element::from_symbol)
        .collect::<Option<Vec<_>>>()?;
    let mut q = AtomQuery {
        elements,
        aromatic: None,
        charge: None,
        hydrogens: None,
        heavy_degree: None,
        saturated: false,
    };
    for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        match flag {
            "ar" => q.aromatic = Some(true),
            "al" => q.aromatic = Some(false),
            "sp3" => q.saturated = true,
            f if f.starts_with('q') => q.charge = Some(f[1..].parse().ok()?),
            f if f.starts_with('h') => q.hydrogens = Some(f[1..].parse().ok()?),
            f if f.starts_with('d') => q.heavy_degree = Some(f[1..].parse().ok()?),
            _ => return None,
        }
    }
    Some(q)
}

fn parse_bond(spec: &str) -> Option<BondQuery> {
    let (ends, order) = spec.split_once(':')?;
    let (a, b) = ends.split_once('-')?;
    let order = match order {
        "1" => Some(BondOrder::Single),
        "2" => Some(BondOrder::Double),
        "3" => Some(BondOrder::Triple),
        "ar" => Some(BondOrder::Aromatic),
        "any" => None,
        _ => return None,
    };
    Some(BondQuery {
        a: a.parse().ok()?,
        b: b.parse().ok()?,
        order,
    })
}

pub fn bundled_alerts() -> &'static [AlertPattern] {
    static ALERTS: OnceLock<Vec<AlertPattern>> = OnceLock::new();
    ALERTS.get_or_init(|| parse_alerts(BUNDLED).expect("bundled alerts parse"))
}

/// Ids of every alert with at least one embedding in `graph`.
pub fn match_alerts(graph: &MolGraph, alerts: &[AlertPattern]) -> Vec<String> {
    alerts
        .iter()
        .filter(|a| a.matches(graph))
        .map(|a| a.id.clone())
        .collect()
}
