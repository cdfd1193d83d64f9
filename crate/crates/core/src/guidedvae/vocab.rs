//! Token vocabulary shared by the encoder and decoder.

use std::collections::{BTreeSet, HashMap};

use molxfer_chem::smiles::tokenize;
use serde::{Deserialize, Serialize};

use crate::error::VaeError;

pub const EOS: usize = 0;
pub const BOS: usize = 1;
const SPECIALS: [&str; 2] = ["<eos>", "<bos>"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Sorted distinct tokens of the corpus after the two special symbols.
    pub fn build<S: AsRef<str>>(corpus: &[S]) -> Result<Self, VaeError> {
        let mut seen = BTreeSet::new();
        for s in corpus {
            let toks = tokenize(s.as_ref()).map_err(|e| VaeError::Tokenize(e.to_string()))?;
            seen.extend(toks.into_iter().map(|t| t.text.to_string()));
        }
        let tokens = SPECIALS.iter().map(|s| s.to_string()).chain(seen).collect();
        Ok(Self::from_tokens(tokens))
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, smiles: &str) -> Result<Vec<usize>, VaeError> {
        let toks = tokenize(smiles).map_err(|e| VaeError::Tokenize(e.to_string()))?;
        toks.iter()
            .map(|t| {
                self.index
                    .get(t.text)
                    .copied()
                    .filter(|&i| i >= SPECIALS.len())
                    .ok_or_else(|| VaeError::OutOfVocabularyToken(t.text.to_string()))
            })
            .collect()
    }

    /// Concatenated token texts, stopping at the first special symbol.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i >= SPECIALS.len())
            .map(|&i| self.tokens[i].as_str())
            .collect()
    }
}
