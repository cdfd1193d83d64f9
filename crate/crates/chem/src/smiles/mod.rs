//! SMILES lexing, parsing, validation and serialization.

mod parse;
mod token;
mod validate;
mod write;

pub use parse::parse;
pub use token::{tokenize, Token, TokenKind};
pub use validate::{validate, Failure, FailureReason, Location, ValidityReport};
pub use write::{morgan_ranks, write};

use crate::error::SmilesError;
use crate::graph::MolGraph;

/// Tokenizes, parses and assigns implicit hydrogens.
pub fn parse_smiles(input: &str) -> Result<MolGraph, SmilesError> {
    let tokens = tokenize(input)?;
    let mut graph = parse(&tokens)?;
    graph.assign_implicit_hydrogens();
    Ok(graph)
}

/// Parses and validates; syntax errors become a failed report.
pub fn check(input: &str) -> (Option<MolGraph>, ValidityReport) {
    match parse_smiles(input) {
        Ok(g) => {
            let report = validate(&g);
            (Some(g), report)
        }
        Err(e) => (None, ValidityReport::syntax(error_position(input, &e))),
    }
}

/// Returns the graph only when it parses and validates.
pub fn parse_valid(input: &str) -> Option<MolGraph> {
    match check(input) {
        (Some(g), r) if r.valid => Some(g),
        _ => None,
    }
}

pub fn is_valid(input: &str) -> bool {
    parse_valid(input).is_some()
}

/// Parses, validates and rewrites in the writer's normal form.
pub fn normalize(input: &str) -> Option<String> {
    parse_valid(input).map(|g| write(&g))
}

fn error_position(input: &str, e: &SmilesError) -> usize {
    match e {
        SmilesError::UnknownCharacter { position, .. }
        | SmilesError::BadBracketAtom(position)
        | SmilesError::UnbalancedBranch(position)
        | SmilesError::DanglingBond(position) => *position,
        _ => input.len(),
    }
}
