//! Tokenization, vocabularies, and entity lexicons shared by every model.

pub mod lexicon;
pub mod tokenize;
pub mod vocab;

pub use lexicon::{EntityType, Lexicon, LexiconFlags, LexiconSet};
pub use tokenize::{normalize_query, tokenize, tokenize_cased, CasedToken};
pub use vocab::{Vocabulary, BOS_TOKEN, EOS_TOKEN, PAD, UNK};

/// Raw text with its tokens and ids under one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub raw: String,
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
}

impl TokenSequence {
    pub fn new(raw: &str, vocab: &Vocabulary) -> Self {
        let tokens = tokenize(raw);
        let ids = vocab.encode(&tokens);
        TokenSequence {
            raw: raw.to_string(),
            tokens,
            ids,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
