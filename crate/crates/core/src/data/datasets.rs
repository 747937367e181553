//! Deterministic train/validation/test splits and click-graded ranking
//! groups.

use std::collections::{BTreeMap, HashMap};

use crate::data::QueryLogEntry;
use crate::text::normalize_query;

/// FNV-1a followed by a SplitMix64 finalizer; stable across platforms and
/// toolchains.
pub fn stable_hash(s: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    /// Assigns each item by a hash of its key, so every item sharing a key
    /// lands in the same split.
    pub fn by_key<F>(items: Vec<T>, key: F, valid_frac: f64, test_frac: f64, seed: u64) -> Self
    where
        F: Fn(&T) -> String,
    {
        let mut s = Splits {
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        for item in items {
            let u = (stable_hash(&key(&item), seed) >> 11) as f64 / (1u64 << 53) as f64;
            if u < test_frac {
                s.test.push(item);
            } else if u < test_frac + valid_frac {
                s.valid.push(item);
            } else {
                s.train.push(item);
            }
        }
        s
    }
}

/// Candidate documents for one query with graded relevance: 2 for a
/// satisfied click, 1 for a click, 0 for shown only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingGroup {
    pub query: String,
    /// `(doc id, grade)`, ascending by doc id.
    pub docs: Vec<(u64, u8)>,
}

impl RankingGroup {
    pub fn has_positive(&self) -> bool {
        self.docs.iter().any(|&(_, g)| g > 0)
    }

    pub fn grade(&self, doc: u64) -> u8 {
        self.docs
            .binary_search_by_key(&doc, |&(d, _)| d)
            .map_or(0, |i| self.docs[i].1)
    }
}

/// Groups log entries by normalized query. A document's grade is the best
/// grade it received across all impressions of the query.
pub fn ranking_groups(log: &[QueryLogEntry]) -> Vec<RankingGroup> {
    let mut groups: BTreeMap<String, BTreeMap<u64, u8>> = BTreeMap::new();
    for e in log {
        let q = normalize_query(&e.query);
        if q.is_empty() {
            continue;
        }
        let g = groups.entry(q).or_default();
        for &d in &e.shown {
            g.entry(d).or_insert(0);
        }
        if let Some(d) = e.clicked_doc {
            let grade = if e.satisfied { 2 } else { 1 };
            let slot = g.entry(d).or_insert(0);
            *slot = (*slot).max(grade);
        }
    }
    groups
        .into_iter()
        .map(|(query, docs)| RankingGroup {
            query,
            docs: docs.into_iter().collect(),
        })
        .collect()
}

/// Clicks received per document.
pub fn click_counts(log: &[QueryLogEntry]) -> HashMap<u64, u64> {
    let mut counts = HashMap::new();
    for d in log.iter().filter_map(|e| e.clicked_doc) {
        *counts.entry(d).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_partition_and_respect_keys() {
        let items: Vec<String> = (0..1000).map(|i| format!("q{}", i % 300)).collect();
        let s = Splits::by_key(items.clone(), |q| q.clone(), 0.1, 0.2, 7);
        assert_eq!(s.train.len() + s.valid.len() + s.test.len(), items.len());
        for q in &s.test {
            assert!(!s.train.contains(q) && !s.valid.contains(q));
        }
        let frac = s.test.len() as f64 / items.len() as f64;
        assert!((0.1..0.3).contains(&frac), "{frac}");
    }

    #[test]
    fn stable_hash_is_fixed() {
        assert_eq!(stable_hash("", 0), stable_hash("", 0));
        assert_ne!(stable_hash("a", 0), stable_hash("a", 1));
    }

    #[test]
    fn grades_take_best_impression() {
        let e = |q: &str, click: Option<u64>, sat: bool| QueryLogEntry {
            timestamp: 0,
            user: 1,
            query: q.into(),
            clicked_doc: click,
            clicked_vertical: click.map(|_| crate::data::Vertical::People),
            shown: vec![1, 2, 3],
            satisfied: sat,
        };
        let log = vec![e("Ann Lee", Some(2), false), e("ann lee", Some(2), true), e("ann lee", Some(3), false)];
        let groups = ranking_groups(&log);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].docs, vec![(1, 0), (2, 2), (3, 1)]);
        assert_eq!(groups[0].grade(2), 2);
        assert_eq!(groups[0].grade(99), 0);
        assert_eq!(click_counts(&log)[&2], 2);
    }
}
