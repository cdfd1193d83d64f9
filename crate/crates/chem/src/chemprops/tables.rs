//! Bundled atom-contribution tables for logP and polar surface area.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::element::Element;
use crate::error::TableError;

const LOGP: &str = include_str!("../../data/logp.txt");
const TPSA: &str = include_str!("../../data/tpsa.txt");

#[derive(Debug, Clone)]
pub struct LogPTable {
    /// (element, aromatic, hetero-neighbor bucket) -> (heavy atom, per hydrogen)
    rows: HashMap<(Element, bool, u8), (f64, f64)>,
    pub charge_penalty: f64,
}

impl LogPTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut rows = HashMap::new();
        let mut charge_penalty = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || TableError::BadLine {
                table: "logp",
                line: lineno + 1,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "CHARGE" {
                let v = fields.get(1).and_then(|f| f.parse().ok()).ok_or_else(bad)?;
                charge_penalty = Some(v);
                continue;
            }
            if fields.len() != 5 {
                return Err(bad());
            }
            let element = Element::from_symbol(fields[0]).ok_or_else(bad)?;
            let aromatic = parse_flag(fields[1]).ok_or_else(bad)?;
            let bucket: u8 = fields[2].parse().map_err(|_| bad())?;
            let heavy: f64 = fields[3].parse().map_err(|_| bad())?;
            let per_h: f64 = fields[4].parse().map_err(|_| bad())?;
            if bucket > 2 {
                return Err(bad());
            }
            rows.insert((element, aromatic, bucket), (heavy, per_h));
        }
        Ok(LogPTable {
            rows,
            charge_penalty: charge_penalty.ok_or(TableError::Invalid {
                table: "logp",
                message: "missing CHARGE line".into(),
            })?,
        })
    }

    pub fn bundled() -> &'static LogPTable {
        static T: OnceLock<LogPTable> = OnceLock::new();
        T.get_or_init(|| LogPTable::parse(LOGP).expect("bundled logp table parses"))
    }

    /// Aromatic lookups fall back to the aliphatic row of the same element.
    pub fn lookup(&self, element: Element, aromatic: bool, hetero: usize) -> Option<(f64, f64)> {
        let bucket = hetero.min(2) as u8;
        self.rows
            .get(&(element, aromatic, bucket))
            .or_else(|| self.rows.get(&(element, false, bucket)))
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TpsaKey {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    pub hydrogens: u8,
    pub single: u8,
    pub double: u8,
    pub triple: u8,
    pub aromatic_bonds: u8,
}

#[derive(Debug, Clone)]
pub struct TpsaTable {
    rows: HashMap<TpsaKey, f64>,
}

impl TpsaTable {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut rows = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || TableError::BadLine {
                table: "tpsa",
                line: lineno + 1,
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 9 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<u8>().map_err(|_| bad());
            let key = TpsaKey {
                element: Element::from_symbol(f[0]).ok_or_else(bad)?,
                aromatic: parse_flag(f[1]).ok_or_else(bad)?,
                charge: f[2].parse().map_err(|_| bad())?,
                hydrogens: int(f[3])?,
                single: int(f[4])?,
                double: int(f[5])?,
                triple: int(f[6])?,
                aromatic_bonds: int(f[7])?,
            };
            let value: f64 = f[8].parse().map_err(|_| bad())?;
            if rows.insert(key, value).is_some() {
                return Err(TableError::Invalid {
                    table: "tpsa",
                    message: format!("duplicate environment on line {}", lineno + 1),
                });
            }
        }
        Ok(TpsaTable { rows })
    }

    pub fn bundled() -> &'static TpsaTable {
        static T: OnceLock<TpsaTable> = OnceLock::new();
        T.get_or_init(|| TpsaTable::parse(TPSA).expect("bundled tpsa table parses"))
    }

    pub fn get(&self, key: &TpsaKey) -> Option<f64> {
        self.rows.get(key).copied()
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}
