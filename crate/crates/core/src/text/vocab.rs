use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

pub const DEFAULT_MAX_SIZE: usize = 100_000;

/// Dense token ↔ id mapping. Id 0 is padding, id 1 is the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the most frequent tokens (ties broken lexicographically) after
    /// the reserved entries, so the result has at most `max_size` ids.
    pub fn build<I, S>(corpus: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        Self::build_with_reserved(corpus, max_size, &[])
    }

    /// As [`Vocabulary::build`], with extra reserved tokens placed right
    /// after PAD and UNK (e.g. sentence markers).
    pub fn build_with_reserved<I, S>(corpus: I, max_size: usize, extra: &[&str]) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[String]>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let docs: Vec<S> = corpus.into_iter().collect();
        if docs.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        for doc in &docs {
            for tok in doc.as_ref() {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = [PAD_TOKEN, UNK_TOKEN]
            .iter()
            .chain(extra)
            .map(|s| s.to_string())
            .collect();
        let room = max_size.saturating_sub(tokens.len());
        tokens.extend(
            ranked
                .into_iter()
                .map(|(t, _)| t)
                .filter(|t| !tokens.iter().any(|r| r == t))
                .take(room)
                .map(str::to_string)
                .collect::<Vec<_>>(),
        );
        Ok(Self::from_tokens(tokens))
    }

    /// Tokens in id order; the first two must be PAD and UNK.
    pub fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::format("vocabulary", "missing reserved PAD/UNK entries"));
        }
        let distinct: std::collections::HashSet<&String> = tokens.iter().collect();
        if distinct.len() != tokens.len() {
            return Err(Error::format("vocabulary", "duplicate token"));
        }
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK_TOKEN, String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `token<TAB>id` per line.
    pub fn to_tsv(&self) -> String {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{t}\t{i}\n"))
            .collect()
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::format("vocabulary", format!("line {}", line_no + 1)))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::format("vocabulary", format!("bad id on line {}", line_no + 1)))?;
            if id != tokens.len() {
                return Err(Error::format("vocabulary", "ids must be dense and ordered"));
            }
            tokens.push(tok.to_string());
        }
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::format("vocabulary", "missing reserved PAD/UNK entries"));
        }
        Ok(Self::from_tokens(tokens))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }
}
