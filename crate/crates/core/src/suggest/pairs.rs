//! Frequency baseline: suggestions are the most common reformulations seen
//! for the exact same query.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text::normalize_query;

const HEADER: &str = "# vsearch-pair-table v1\tsource\ttarget\tcount";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestions {
    pub suggestions: Vec<Suggestion>,
    /// False when the method had nothing to offer for the query.
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairTable {
    /// Targets sorted by descending count, then text.
    map: BTreeMap<String, Vec<(String, u64)>>,
}

impl PairTable {
    /// Counts normalized `(source, target)` pairs; pairs whose target equals
    /// the source are skipped.
    pub fn build(pairs: &[(String, String)]) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (s, t) in pairs {
            let (s, t) = (normalize_query(s), normalize_query(t));
            if s.is_empty() || t.is_empty() || s == t {
                continue;
            }
            *counts.entry(s).or_default().entry(t).or_default() += 1;
        }
        Self::from_counts(counts)
    }

    fn from_counts(counts: BTreeMap<String, BTreeMap<String, u64>>) -> Self {
        let map = counts
            .into_iter()
            .map(|(s, targets)| {
                let mut v: Vec<(String, u64)> = targets.into_iter().collect();
                v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (s, v)
            })
            .collect();
        PairTable { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, query: &str) -> bool {
        self.map.contains_key(&normalize_query(query))
    }

    pub fn targets(&self, query: &str) -> &[(String, u64)] {
        self.map.get(&normalize_query(query)).map_or(&[], Vec::as_slice)
    }

    pub fn suggest(&self, query: &str, k: usize) -> Suggestions {
        let targets = self.targets(query);
        Suggestions {
            covered: !targets.is_empty(),
            suggestions: targets
                .iter()
                .take(k)
                .map(|(t, c)| Suggestion {
                    text: t.clone(),
                    score: *c as f64,
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (s, targets) in &self.map {
            for (t, c) in targets {
                out.push_str(&format!("{s}\t{t}\t{c}\n"));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::format("pair table", "missing header"));
        }
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            let [s, t, c] = cols[..] else {
                return Err(Error::format("pair table", format!("line {} has {} columns", i + 2, cols.len())));
            };
            let c: u64 = c
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::format("pair table", format!("bad count on line {}", i + 2)))?;
            *counts.entry(s.to_string()).or_default().entry(t.to_string()).or_default() += c;
        }
        Ok(Self::from_counts(counts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str, usize)]) -> Vec<(String, String)> {
        items
            .iter()
            .flat_map(|(s, t, n)| std::iter::repeat((s.to_string(), t.to_string())).take(*n))
            .collect()
    }

    fn texts(s: &Suggestions) -> Vec<&str> {
        s.suggestions.iter().map(|x| x.text.as_str()).collect()
    }

    #[test]
    fn ordered_by_count() {
        let t = PairTable::build(&pairs(&[("a b", "a d", 1), ("a b", "a c", 3)]));
        let s = t.suggest("A  b", 5);
        assert!(s.covered);
        assert_eq!(texts(&s), vec!["a c", "a d"]);
    }

    #[test]
    fn unseen_query_not_covered() {
        let t = PairTable::build(&pairs(&[("a b", "a c", 3)]));
        let s = t.suggest("zz", 5);
        assert!(!s.covered && s.suggestions.is_empty());
    }

    #[test]
    fn ties_are_lexicographic() {
        let t = PairTable::build(&pairs(&[("q", "z", 2), ("q", "m", 2), ("q", "a", 2)]));
        assert_eq!(texts(&t.suggest("q", 2)), vec!["a", "m"]);
    }

    #[test]
    fn identical_pairs_skipped_and_round_trip() {
        let t = PairTable::build(&pairs(&[("q", "q", 4), ("q", "r", 1), ("s", "t", 2)]));
        assert_eq!(t.targets("q"), &[("r".to_string(), 1)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        t.save(&p).unwrap();
        assert_eq!(PairTable::load(&p).unwrap(), t);
    }
}
