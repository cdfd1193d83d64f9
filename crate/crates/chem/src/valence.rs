//! Allowed valences per (element, formal charge), loaded from a plain-text table.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::element::Element;
use crate::error::TableError;

const BUNDLED: &str = include_str!("../data/valence.txt");

#[derive(Debug, Clone)]
pub struct ValenceTable {
    entries: HashMap<(Element, i8), Vec<u8>>,
}

impl ValenceTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || TableError::BadLine {
                table: "valence",
                line: lineno + 1,
            };
            let mut fields = line.split_whitespace();
            let element = fields
                .next()
                .and_then(Element::from_symbol)
                .ok_or_else(bad)?;
            let charge: i8 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            let mut valences: Vec<u8> = fields
                .map(|f| f.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            if valences.is_empty() {
                return Err(bad());
            }
            valences.sort_unstable();
            entries.insert((element, charge), valences);
        }
        Ok(ValenceTable { entries })
    }

    pub fn bundled() -> &'static ValenceTable {
        static TABLE: OnceLock<ValenceTable> = OnceLock::new();
        TABLE.get_or_init(|| ValenceTable::parse(BUNDLED).expect("bundled valence table parses"))
    }

    /// Allowed valences, ascending; `None` when the charge state is unsupported.
    pub fn valences(&self, element: Element, charge: i8) -> Option<&[u8]> {
        self.entries.get(&(element, charge)).map(Vec::as_slice)
    }

    pub fn max_valence(&self, element: Element, charge: i8) -> Option<u8> {
        self.valences(element, charge)
            .and_then(|v| v.last().copied())
    }

    /// Valence an aromatic atom of this element is filled to when assigning hydrogens.
    pub fn aromatic_default(&self, element: Element) -> u8 {
        self.valences(element, 0)
            .and_then(|v| v.first().copied())
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_has_charge_shifted_nitrogen() {
        let t = ValenceTable::bundled();
        assert_eq!(t.valences(Element::N, 0), Some(&[3u8, 5][..]));
        assert_eq!(t.valences(Element::N, 1), Some(&[4u8][..]));
        assert_eq!(t.valences(Element::C, 4), None);
        assert_eq!(t.aromatic_default(Element::C), 4);
        assert_eq!(t.aromatic_default(Element::N), 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ValenceTable::parse("C x 4").is_err());
        assert!(ValenceTable::parse("Xx 0 4").is_err());
        assert!(ValenceTable::parse("C 0").is_err());
    }
}
