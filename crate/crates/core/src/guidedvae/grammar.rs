//! Token mask that keeps decoded prefixes syntactically closable and within
//! standard valences.

use std::collections::BTreeMap;

use molxfer_chem::smiles::{tokenize, TokenKind};

use crate::guidedvae::vocab::{Vocabulary, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    End,
    Atom(u8),
    Bond(u8),
    Ring(u16),
    Open,
    Close,
    Forbidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prev {
    Start,
    Atom,
    Bond,
    Open,
    Close,
    Ring,
}

fn organic_capacity(text: &str) -> u8 {
    match text {
        "B" | "N" | "b" | "c" | "n" | "p" => 3,
        "C" => 4,
        "O" | "S" | "o" | "s" => 2,
        "P" => 5,
        _ => 1,
    }
}

fn element_base(symbol: &str) -> (u8, i8) {
    match symbol.to_ascii_lowercase().as_str() {
        "b" => (3, -1),
        "c" | "si" => (4, 0),
        "n" | "p" | "as" => (3, 1),
        "o" | "s" | "se" => (2, 1),
        "f" | "cl" | "br" | "i" => (1, 1),
        _ => (4, 0),
    }
}

/// Bond capacity of a bracket atom from its element, hydrogen count and charge.
fn bracket_capacity(text: &str) -> u8 {
    let inner = text.trim_start_matches('[').trim_end_matches(']');
    let inner = inner.trim_start_matches(|c: char| c.is_ascii_digit());
    let two = inner.get(..2).filter(|t| {
        matches!(
            t.to_ascii_lowercase().as_str(),
            "cl" | "br" | "si" | "se" | "as"
        )
    });
    let symbol = two.unwrap_or_else(|| inner.get(..1).unwrap_or(""));
    let rest = &inner[symbol.len()..];
    let mut hydrogens = 0i32;
    let mut charge = 0i32;
    let mut chars = rest.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            'H' => {
                let mut n = String::new();
                while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                    n.push(*d);
                    chars.next();
                }
                hydrogens += n.parse().unwrap_or(1);
            }
            '+' | '-' => {
                let sign = if c == '+' { 1 } else { -1 };
                let mut n = String::new();
                while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                    n.push(*d);
                    chars.next();
                }
                charge += sign * n.parse().unwrap_or(1);
            }
            _ => {}
        }
    }
    let (base, direction) = element_base(symbol);
    let adjusted = match direction {
        0 => base as i32 - charge.abs(),
        d => base as i32 + d as i32 * charge,
    };
    (adjusted - hydrogens).clamp(0, 8) as u8
}

fn bond_order(text: &str) -> u8 {
    match text {
        "=" => 2,
        "#" => 3,
        "$" => 4,
        _ => 1,
    }
}

fn classify(token: &str) -> Class {
    let Ok(toks) = tokenize(token) else {
        return Class::Forbidden;
    };
    let [t] = toks.as_slice() else {
        return Class::Forbidden;
    };
    match t.kind {
        TokenKind::Atom => Class::Atom(organic_capacity(t.text)),
        TokenKind::BracketAtom => Class::Atom(bracket_capacity(t.text)),
        TokenKind::Bond => Class::Bond(bond_order(t.text)),
        TokenKind::RingClosure => t
            .text
            .trim_start_matches('%')
            .parse()
            .map_or(Class::Forbidden, Class::Ring),
        TokenKind::BranchOpen => Class::Open,
        TokenKind::BranchClose => Class::Close,
        TokenKind::Dot => Class::Forbidden,
    }
}

/// Per-vocabulary token classes.
#[derive(Debug, Clone)]
pub struct DecodeGrammar {
    classes: Vec<Class>,
}

impl DecodeGrammar {
    pub fn new(vocab: &Vocabulary) -> Self {
        let classes = vocab
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| match i {
                EOS => Class::End,
                _ if i < 2 => Class::Forbidden,
                _ => classify(t),
            })
            .collect();
        DecodeGrammar { classes }
    }

    pub fn start(&self) -> GrammarState {
        GrammarState::default()
    }

    /// True when `token` may follow the prefix and leaves it completable.
    pub fn allowed(&self, state: &GrammarState, token: usize) -> bool {
        self.allowed_within(state, token, usize::MAX)
    }

    /// Like [`DecodeGrammar::allowed`], additionally requiring a completion
    /// of at most `budget` further tokens, the end symbol included.
    pub fn allowed_within(&self, state: &GrammarState, token: usize, budget: usize) -> bool {
        let class = self.classes[token];
        if !state.allows(class) {
            return false;
        }
        if class == Class::End {
            return true;
        }
        let mut next = state.clone();
        next.push(class);
        next.completion_bound().is_some_and(|n| n <= budget)
    }

    pub fn push(&self, state: &mut GrammarState, token: usize) {
        state.push(self.classes[token]);
    }
}

/// Decoding prefix state: open branches, open ring bonds and remaining
/// bond capacity per atom.
#[derive(Debug, Clone)]
pub struct GrammarState {
    remaining: Vec<u8>,
    parent: Vec<Option<usize>>,
    current: Option<usize>,
    branches: Vec<Option<usize>>,
    rings: BTreeMap<u16, (usize, u8)>,
    pending: Option<u8>,
    bond_after_atom: bool,
    prev: Prev,
}

impl Default for GrammarState {
    fn default() -> Self {
        GrammarState {
            remaining: Vec::new(),
            parent: Vec::new(),
            current: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
            pending: None,
            bond_after_atom: false,
            prev: Prev::Start,
        }
    }
}

impl GrammarState {
    fn room(&self, order: u8) -> bool {
        self.current.is_some_and(|a| self.remaining[a] >= order)
    }

    /// Length of a completion built from fresh carbons, ring digits, branch
    /// closes and the end symbol, or `None` when no completion exists.
    fn completion_bound(&self) -> Option<usize> {
        let fresh = matches!(self.prev, Prev::Start | Prev::Bond | Prev::Open);
        let room = if fresh {
            let order = match self.prev {
                Prev::Start => 0,
                _ => self.pending.unwrap_or(1),
            };
            4u8.saturating_sub(order)
        } else {
            self.current.map_or(0, |a| self.remaining[a])
        };
        let reachable = room >= 1
            || self
                .branches
                .iter()
                .flatten()
                .any(|&a| self.remaining[a] >= 1);
        if !self.rings.is_empty() && !reachable {
            return None;
        }
        let rings = match self.rings.len() {
            0 => 0,
            n => 2 * n + 1,
        };
        Some(usize::from(fresh) + rings + self.branches.len() + 1)
    }

    fn allows(&self, class: Class) -> bool {
        let after_atom = matches!(self.prev, Prev::Atom | Prev::Ring);
        match class {
            Class::Forbidden => false,
            Class::End => {
                self.branches.is_empty()
                    && self.rings.is_empty()
                    && (after_atom || self.prev == Prev::Close)
            }
            Class::Atom(cap) => {
                let order = self.pending.unwrap_or(1);
                match self.prev {
                    Prev::Start => true,
                    _ => self.room(order) && cap >= order,
                }
            }
            Class::Bond(order) => {
                matches!(
                    self.prev,
                    Prev::Atom | Prev::Ring | Prev::Open | Prev::Close
                ) && self.room(order)
            }
            Class::Open => (after_atom || self.prev == Prev::Close) && self.room(1),
            Class::Close => !self.branches.is_empty() && (after_atom || self.prev == Prev::Close),
            Class::Ring(d) => {
                if !(after_atom || (self.prev == Prev::Bond && self.bond_after_atom)) {
                    return false;
                }
                let Some(a) = self.current else {
                    return false;
                };
                match self.rings.get(&d) {
                    Some(&(b, ob)) => {
                        let order = self.pending.unwrap_or(ob);
                        b != a && self.parent[a] != Some(b) && self.remaining[a] >= order
                    }
                    None => self.remaining[a] >= self.pending.unwrap_or(1),
                }
            }
        }
    }

    fn push(&mut self, class: Class) {
        match class {
            Class::Atom(cap) => {
                let order = self.pending.take().unwrap_or(1);
                let idx = self.remaining.len();
                match self.current {
                    Some(a) if self.prev != Prev::Start => {
                        self.remaining[a] = self.remaining[a].saturating_sub(order);
                        self.parent.push(Some(a));
                        self.remaining.push(cap.saturating_sub(order));
                    }
                    _ => {
                        self.parent.push(None);
                        self.remaining.push(cap);
                    }
                }
                self.current = Some(idx);
                self.prev = Prev::Atom;
            }
            Class::Bond(order) => {
                self.bond_after_atom = matches!(self.prev, Prev::Atom | Prev::Ring);
                self.pending = Some(order);
                self.prev = Prev::Bond;
            }
            Class::Open => {
                self.branches.push(self.current);
                self.prev = Prev::Open;
            }
            Class::Close => {
                self.current = self.branches.pop().flatten();
                self.prev = Prev::Close;
            }
            Class::Ring(d) => {
                if let Some(a) = self.current {
                    let order = match self.rings.remove(&d) {
                        Some((_, ob)) => self.pending.take().unwrap_or(ob),
                        None => {
                            let order = self.pending.take().unwrap_or(1);
                            self.rings.insert(d, (a, order));
                            order
                        }
                    };
                    self.remaining[a] = self.remaining[a].saturating_sub(order);
                }
                self.prev = Prev::Ring;
            }
            Class::End | Class::Forbidden => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accepts(grammar: &DecodeGrammar, vocab: &Vocabulary, smiles: &str) -> bool {
        let mut state = grammar.start();
        for id in vocab.encode(smiles).unwrap() {
            if !grammar.allowed(&state, id) {
                return false;
            }
            grammar.push(&mut state, id);
        }
        grammar.allowed(&state, EOS)
    }

    #[test]
    fn accepts_valid_and_rejects_broken_prefixes() {
        let corpus = [
            "CC(=O)Oc1ccccc1C(=O)O",
            "C1CC2CCC1C2",
            "[O-][N+](=O)c1ccc[nH]1",
            "FC(F)(F)C#N",
            "CCC)",
            "C(C",
            "C1CC",
            "F(F)F",
            "C=1CCC1",
        ];
        let vocab = Vocabulary::build(&corpus).unwrap();
        let grammar = DecodeGrammar::new(&vocab);
        for good in &corpus[..4] {
            assert!(accepts(&grammar, &vocab, good), "{good}");
        }
        assert!(accepts(&grammar, &vocab, "C=1CCC1"));
        for bad in [
            "CCC)",
            "C(C",
            "C1CC",
            "F(F)F",
            "C(C)(C)(C)(C)C",
            "C11",
            "CC1C1",
            "C=(C)",
        ] {
            assert!(!accepts(&grammar, &vocab, bad), "{bad}");
        }
    }

    #[test]
    fn rejects_prefixes_that_cannot_close_their_rings() {
        let vocab = Vocabulary::build(&["C1CCC1F", "C2CC(F)C2", "OC1CC1"]).unwrap();
        let grammar = DecodeGrammar::new(&vocab);
        let mut state = grammar.start();
        for id in vocab.encode("C1CC").unwrap() {
            grammar.push(&mut state, id);
        }
        let fluorine = vocab.encode("F").unwrap()[0];
        assert!(state.allows(grammar.classes[fluorine]));
        assert!(!grammar.allowed(&state, fluorine));
        assert!(grammar.allowed(&state, vocab.encode("C").unwrap()[0]));
    }

    #[test]
    fn budget_forces_closure() {
        let vocab = Vocabulary::build(&["C1CCC1", "CC(C)C"]).unwrap();
        let grammar = DecodeGrammar::new(&vocab);
        let mut state = grammar.start();
        for id in vocab.encode("C1CC").unwrap() {
            grammar.push(&mut state, id);
        }
        let carbon = vocab.encode("C").unwrap()[0];
        let one = vocab.encode("C1").unwrap()[1];
        assert!(grammar.allowed_within(&state, carbon, 10));
        assert!(!grammar.allowed_within(&state, carbon, 3));
        assert!(grammar.allowed_within(&state, one, 1));
    }

    #[test]
    fn bracket_capacities() {
        assert_eq!(bracket_capacity("[O-]"), 1);
        assert_eq!(bracket_capacity("[N+]"), 4);
        assert_eq!(bracket_capacity("[nH]"), 2);
        assert_eq!(bracket_capacity("[SeH]"), 1);
        assert_eq!(bracket_capacity("[Si]"), 4);
        assert_eq!(bracket_capacity("[B-]"), 4);
        assert_eq!(bracket_capacity("[NH3+]"), 1);
        assert_eq!(bracket_capacity("[Cl]"), 1);
    }
}
