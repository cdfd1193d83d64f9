use std::fmt;

use crate::error::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Atom,
    BracketAtom,
    Bond,
    RingClosure,
    BranchOpen,
    BranchClose,
    Dot,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TokenKind::Atom => "atom",
            TokenKind::BracketAtom => "bracket_atom",
            TokenKind::Bond => "bond",
            TokenKind::RingClosure => "ring_closure",
            TokenKind::BranchOpen => "branch_open",
            TokenKind::BranchClose => "branch_close",
            TokenKind::Dot => "dot",
        };
        f.write_str(name)
    }
}

/// A lexical unit of a SMILES string, borrowing its text from the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the token in the source string.
    pub position: usize,
}

/// Splits a SMILES string into tokens. Token texts concatenate back to the input.
pub fn tokenize(input: &str) -> Result<Vec<Token<'_>>, SmilesError> {
    if input.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let bytes = input.as_bytes();
    let mut tokens = Vec::with_capacity(input.len());
    let mut pos = 0;
    while pos < bytes.len() {
        let start = pos;
        let (kind, len) = match bytes[pos] {
            b'[' => match input[pos..].find(']') {
                Some(close) => (TokenKind::BracketAtom, close + 1),
                None => return Err(SmilesError::BadBracketAtom(pos)),
            },
            b'B' if bytes.get(pos + 1) == Some(&b'r') => (TokenKind::Atom, 2),
            b'C' if bytes.get(pos + 1) == Some(&b'l') => (TokenKind::Atom, 2),
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => (TokenKind::Atom, 1),
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => (TokenKind::Atom, 1),
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => (TokenKind::Bond, 1),
            b'0'..=b'9' => (TokenKind::RingClosure, 1),
            b'%' => {
                let two_digits = bytes.get(pos + 1).is_some_and(u8::is_ascii_digit)
                    && bytes.get(pos + 2).is_some_and(u8::is_ascii_digit);
                if !two_digits {
                    return Err(SmilesError::UnknownCharacter {
                        position: pos,
                        ch: '%',
                    });
                }
                (TokenKind::RingClosure, 3)
            }
            b'(' => (TokenKind::BranchOpen, 1),
            b')' => (TokenKind::BranchClose, 1),
            b'.' => (TokenKind::Dot, 1),
            _ => {
                let ch = input[pos..].chars().next().unwrap_or('\u{fffd}');
                return Err(SmilesError::UnknownCharacter { position: pos, ch });
            }
        };
        pos += len;
        tokens.push(Token {
            kind,
            text: &input[start..pos],
            position: start,
        });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<&str> {
        tokenize(s).unwrap().iter().map(|t| t.text).collect()
    }

    #[test]
    fn benzene_is_one_token_per_char() {
        assert_eq!(
            texts("c1ccccc1"),
            vec!["c", "1", "c", "c", "c", "c", "c", "1"]
        );
    }

    #[test]
    fn bracket_atom_is_single_token() {
        let toks = tokenize("CC(=O)[O-]").unwrap();
        assert_eq!(toks.len(), 7);
        assert_eq!(toks[6].kind, TokenKind::BracketAtom);
        assert_eq!(toks[6].text, "[O-]");
        assert_eq!(toks[2].kind, TokenKind::BranchOpen);
        assert_eq!(toks[3].kind, TokenKind::Bond);
    }

    #[test]
    fn two_letter_halogens_stay_whole() {
        assert_eq!(texts("CCl"), vec!["C", "Cl"]);
        assert_eq!(texts("BrCBr"), vec!["Br", "C", "Br"]);
        assert_eq!(texts("BC"), vec!["B", "C"]);
    }

    #[test]
    fn percent_ring_closures() {
        assert_eq!(texts("C%12CC%12"), vec!["C", "%12", "C", "C", "%12"]);
        assert!(matches!(
            tokenize("C%1"),
            Err(SmilesError::UnknownCharacter { position: 1, .. })
        ));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(tokenize(""), Err(SmilesError::EmptyInput));
        assert_eq!(
            tokenize("CCX"),
            Err(SmilesError::UnknownCharacter {
                position: 2,
                ch: 'X'
            })
        );
        assert_eq!(tokenize("C[NH4+"), Err(SmilesError::BadBracketAtom(1)));
    }
}
