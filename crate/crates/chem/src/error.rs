use thiserror::Error;

use crate::element::Element;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("bond {0} references a missing atom")]
    BadEndpoint(usize),
    #[error("atom {0} is bonded to itself")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty input")]
    EmptyInput,
    #[error("unknown character {ch:?} at position {position}")]
    UnknownCharacter { position: usize, ch: char },
    #[error("malformed bracket atom at position {0}")]
    BadBracketAtom(usize),
    #[error("ring bond {0} is never closed")]
    UnclosedRingBond(u16),
    #[error("ring bond {0} closes with conflicting bond orders")]
    ConflictingRingBond(u16),
    #[error("unbalanced branch at position {0}")]
    UnbalancedBranch(usize),
    #[error("bond symbol without a partner atom at position {0}")]
    DanglingBond(usize),
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("{table} table: malformed line {line}")]
    BadLine { table: &'static str, line: usize },
    #[error("{table} table: {message}")]
    Invalid {
        table: &'static str,
        message: String,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("element {0} has no entry in the contribution table")]
    UnsupportedElement(Element),
    #[error("fragment table is empty")]
    EmptyTable,
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("training corpus is empty")]
    EmptyCorpus,
}
