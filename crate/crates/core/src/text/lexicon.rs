use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// The seven entity types recognized by the query tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    FirstName,
    LastName,
    Company,
    School,
    Geo,
    Title,
    Skill,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::FirstName,
        EntityType::LastName,
        EntityType::Company,
        EntityType::School,
        EntityType::Geo,
        EntityType::Title,
        EntityType::Skill,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::FirstName => "first_name",
            EntityType::LastName => "last_name",
            EntityType::Company => "company",
            EntityType::School => "school",
            EntityType::Geo => "geo",
            EntityType::Title => "title",
            EntityType::Skill => "skill",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown entity type {s}")))
    }
}

/// Phrase dictionary for one entity type. Phrases are stored as lowercase
/// token sequences and matched exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    phrases: HashSet<Vec<String>>,
    max_len: usize,
}

impl Lexicon {
    pub fn insert(&mut self, phrase: &str) {
        let toks = tokenize(phrase);
        if !toks.is_empty() {
            self.max_len = self.max_len.max(toks.len());
            self.phrases.insert(toks);
        }
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.phrases.contains(tokens)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Sorted phrases, space-joined.
    pub fn sorted_phrases(&self) -> Vec<String> {
        let mut v: Vec<String> = self.phrases.iter().map(|p| p.join(" ")).collect();
        v.sort();
        v
    }

    /// Greedy longest match, left to right. Returns `(start, end)` spans.
    pub fn match_spans(&self, tokens: &[String]) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = (1..=self.max_len.min(tokens.len() - i))
                .rev()
                .find(|&n| self.contains(&tokens[i..i + n]));
            match longest {
                Some(n) => {
                    spans.push((i, i + n));
                    i += n;
                }
                None => i += 1,
            }
        }
        spans
    }
}

/// One flag per entity type, for one token.
pub type LexiconFlags = [bool; 7];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconSet {
    lexicons: [Lexicon; 7],
}

impl LexiconSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, t: EntityType) -> &Lexicon {
        &self.lexicons[t.index()]
    }

    pub fn insert(&mut self, t: EntityType, phrase: &str) {
        self.lexicons[t.index()].insert(phrase);
    }

    pub fn is_empty(&self) -> bool {
        self.lexicons.iter().all(Lexicon::is_empty)
    }

    pub fn max_len(&self) -> usize {
        self.lexicons.iter().map(Lexicon::max_len).max().unwrap_or(0)
    }

    /// Per-token flags: for each type, tokens covered by a greedy
    /// longest-match phrase of that type.
    pub fn lexicon_match(&self, tokens: &[String]) -> Vec<LexiconFlags> {
        let mut flags = vec![[false; 7]; tokens.len()];
        for t in EntityType::ALL {
            for (s, e) in self.get(t).match_spans(tokens) {
                for f in &mut flags[s..e] {
                    f[t.index()] = true;
                }
            }
        }
        flags
    }

    /// Stores every lexicon in checkpoint metadata under `lexicon.<type>`.
    pub fn to_checkpoint(&self, mut ckpt: crate::nn::Checkpoint) -> crate::nn::Checkpoint {
        for t in EntityType::ALL {
            ckpt = ckpt.with_list(&format!("lexicon.{}", t.name()), &self.get(t).sorted_phrases());
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &crate::nn::Checkpoint) -> Result<Self> {
        let mut set = LexiconSet::new();
        for t in EntityType::ALL {
            for p in ckpt.meta_list(&format!("lexicon.{}", t.name()))? {
                set.insert(t, &p);
            }
        }
        Ok(set)
    }

    /// Writes `<type>.lex` files, one sorted phrase per line.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for t in EntityType::ALL {
            let mut body = self.get(t).sorted_phrases().join("\n");
            body.push('\n');
            fs::write(dir.join(format!("{}.lex", t.name())), body)?;
        }
        Ok(())
    }

    /// Missing files load as empty lexicons.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = LexiconSet::new();
        for t in EntityType::ALL {
            let path = dir.join(format!("{}.lex", t.name()));
            if !path.exists() {
                continue;
            }
            for line in fs::read_to_string(path)?.lines() {
                set.insert(t, line);
            }
        }
        Ok(set)
    }
}
