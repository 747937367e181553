//! Candidate generation: historical queries by prefix, plus synthetic
//! completions built from a word table and frequent query suffixes.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text::{normalize_query, tokenize};

pub const DEFAULT_MIN_SUPPORT: u64 = 3;
/// Longest suffix unit, in tokens.
pub const MAX_SUFFIX_TOKENS: usize = 3;
const WORD_COMPLETIONS: usize = 5;
const SUFFIX_EXTENSIONS: usize = 10;

const QUERIES_HEADER: &str = "# vsearch-completion-queries v1";
const SUFFIXES_HEADER: &str = "# vsearch-completion-suffixes v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    FullQuery,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub text: String,
    pub source: CandidateSource,
    /// Frequency of the generating unit: query count for full queries,
    /// suffix or word count for synthetic ones.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompletionIndex {
    queries: BTreeMap<String, u64>,
    words: BTreeMap<String, u64>,
    suffixes: BTreeMap<String, u64>,
    min_support: u64,
}

/// A typed prefix split into finished tokens and the word being typed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prefix {
    /// Lowercased prefix with whitespace collapsed; a trailing space is kept
    /// when the user has finished the last word.
    pub normalized: String,
    pub complete: Vec<String>,
    pub partial: Option<String>,
}

impl Prefix {
    pub fn parse(raw: &str) -> Self {
        let mut tokens = tokenize(raw);
        let ends_open = raw.chars().last().is_some_and(char::is_alphanumeric);
        let partial = if ends_open { tokens.pop() } else { None };
        let mut normalized = tokens.join(" ");
        if let Some(p) = &partial {
            if !normalized.is_empty() {
                normalized.push(' ');
            }
            normalized.push_str(p);
        } else if !tokens.is_empty() {
            normalized.push(' ');
        }
        Prefix {
            normalized,
            complete: tokens,
            partial,
        }
    }
}

impl CompletionIndex {
    pub fn build<S: AsRef<str>>(queries: &[S], min_support: u64) -> Self {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for q in queries {
            let n = normalize_query(q.as_ref());
            if !n.is_empty() {
                *counts.entry(n).or_default() += 1;
            }
        }
        Self::from_counts(counts, min_support)
    }

    fn from_counts(queries: BTreeMap<String, u64>, min_support: u64) -> Self {
        let mut words: BTreeMap<String, u64> = BTreeMap::new();
        let mut suffixes: BTreeMap<String, u64> = BTreeMap::new();
        for (q, &c) in &queries {
            let toks: Vec<&str> = q.split(' ').collect();
            for t in &toks {
                *words.entry(t.to_string()).or_default() += c;
            }
            for n in 1..=MAX_SUFFIX_TOKENS.min(toks.len()) {
                *suffixes.entry(toks[toks.len() - n..].join(" ")).or_default() += c;
            }
        }
        suffixes.retain(|_, c| *c >= min_support);
        CompletionIndex {
            queries,
            words,
            suffixes,
            min_support,
        }
    }

    pub fn query_count(&self, q: &str) -> u64 {
        self.queries.get(&normalize_query(q)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn suffix_count(&self, s: &str) -> u64 {
        self.suffixes.get(s).copied().unwrap_or(0)
    }

    fn starting_with<'a>(map: &'a BTreeMap<String, u64>, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a u64)> {
        map.range::<str, _>((std::ops::Bound::Included(prefix), std::ops::Bound::Unbounded))
            .take_while(move |(k, _)| k.starts_with(prefix))
    }

    fn top(mut items: Vec<(String, u64)>, n: usize) -> Vec<(String, u64)> {
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(n);
        items
    }

    /// Full historical queries first (by count), then synthetic completions
    /// (by the count of the unit that produced them); deduplicated, capped
    /// at `max_n`, and all extending the normalized prefix.
    pub fn candidates(&self, raw_prefix: &str, max_n: usize) -> Vec<Candidate> {
        let prefix = Prefix::parse(raw_prefix);
        let full = Self::top(
            Self::starting_with(&self.queries, &prefix.normalized)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            max_n,
        );
        let mut seen: HashSet<String> = HashSet::new();
        let mut out: Vec<Candidate> = Vec::new();
        for (text, support) in full {
            seen.insert(text.clone());
            out.push(Candidate {
                text,
                source: CandidateSource::FullQuery,
                support,
            });
        }

        let mut synthetic: Vec<(String, u64)> = Vec::new();
        let bases: Vec<(String, u64)> = match &prefix.partial {
            Some(p) => Self::top(
                Self::starting_with(&self.words, p).map(|(k, v)| (k.clone(), *v)).collect(),
                WORD_COMPLETIONS,
            )
            .into_iter()
            .map(|(w, c)| {
                let mut toks = prefix.complete.clone();
                toks.push(w);
                (toks.join(" "), c)
            })
            .collect(),
            None if !prefix.complete.is_empty() => vec![(prefix.complete.join(" "), 0)],
            None => Vec::new(),
        };
        let top_suffixes = Self::top(
            self.suffixes.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            SUFFIX_EXTENSIONS,
        );
        for (base, _) in &bases {
            let last = base.rsplit(' ').next().unwrap_or("");
            for (suffix, sc) in &top_suffixes {
                if suffix.split(' ').next() != Some(last) {
                    synthetic.push((format!("{base} {suffix}"), *sc));
                }
            }
        }
        for (text, support) in Self::top(synthetic, usize::MAX) {
            if out.len() >= max_n {
                break;
            }
            if text.starts_with(&prefix.normalized) && seen.insert(text.clone()) {
                out.push(Candidate {
                    text,
                    source: CandidateSource::Synthetic,
                    support,
                });
            }
        }
        out.truncate(max_n);
        out
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut q = String::from(QUERIES_HEADER);
        q.push('\n');
        for (k, v) in &self.queries {
            q.push_str(&format!("{k}\t{v}\n"));
        }
        std::fs::write(dir.join("queries.tsv"), q)?;
        let mut s = format!("{SUFFIXES_HEADER}\tmin_support={}\n", self.min_support);
        for (k, v) in &self.suffixes {
            s.push_str(&format!("{k}\t{v}\n"));
        }
        std::fs::write(dir.join("suffixes.tsv"), s)?;
        Ok(())
    }

    /// Rebuilds the index from the saved query counts and checks the saved
    /// suffix table against it.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let parse = |text: &str, header: &str, what: &'static str| -> Result<(String, BTreeMap<String, u64>)> {
            let mut lines = text.lines();
            let first = lines.next().unwrap_or("");
            if !first.starts_with(header) {
                return Err(Error::format(what, "missing header"));
            }
            let mut map = BTreeMap::new();
            for (i, line) in lines.enumerate() {
                let (k, v) = line
                    .rsplit_once('\t')
                    .ok_or_else(|| Error::format(what, format!("line {}", i + 2)))?;
                let v: u64 = v.parse().map_err(|_| Error::format(what, format!("bad count on line {}", i + 2)))?;
                map.insert(k.to_string(), v);
            }
            Ok((first.to_string(), map))
        };
        let (_, queries) = parse(
            &std::fs::read_to_string(dir.join("queries.tsv"))?,
            QUERIES_HEADER,
            "completion queries",
        )?;
        let (header, suffixes) = parse(
            &std::fs::read_to_string(dir.join("suffixes.tsv"))?,
            SUFFIXES_HEADER,
            "completion suffixes",
        )?;
        let min_support = header
            .rsplit_once("min_support=")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(DEFAULT_MIN_SUPPORT);
        let index = Self::from_counts(queries, min_support);
        if index.suffixes != suffixes {
            return Err(Error::format("completion suffixes", "suffix table does not match query counts"));
        }
        Ok(index)
    }
}
