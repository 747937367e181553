//! Turning query logs into labels: click-derived intent labels and
//! session-mined reformulation pairs.

use std::collections::{BTreeMap, HashSet};

use crate::data::{QueryLogEntry, Vertical};
use crate::text::{normalize_query, tokenize};

/// Maximum gap between consecutive queries of one session.
pub const SESSION_GAP_SECS: u64 = 600;

/// One `(query, vertical)` example per entry whose click landed on one of
/// the seven intent verticals.
pub fn derive_intent_labels(log: &[QueryLogEntry]) -> Vec<(String, Vertical)> {
    log.iter()
        .filter_map(|e| match e.clicked_vertical {
            Some(v) if v.intent_index().is_some() => Some((e.query.clone(), v)),
            _ => None,
        })
        .collect()
}

/// Consecutive same-user queries at most [`SESSION_GAP_SECS`] apart that
/// share a token. Queries are returned normalized, earlier query first.
pub fn mine_suggestion_pairs(log: &[QueryLogEntry]) -> Vec<(String, String)> {
    let mut by_user: BTreeMap<u64, Vec<&QueryLogEntry>> = BTreeMap::new();
    for e in log {
        by_user.entry(e.user).or_default().push(e);
    }
    let mut pairs = Vec::new();
    for entries in by_user.values_mut() {
        entries.sort_by_key(|e| e.timestamp);
        for w in entries.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.timestamp - a.timestamp > SESSION_GAP_SECS {
                continue;
            }
            let ta: HashSet<String> = tokenize(&a.query).into_iter().collect();
            if tokenize(&b.query).iter().any(|t| ta.contains(t)) {
                pairs.push((normalize_query(&a.query), normalize_query(&b.query)));
            }
        }
    }
    pairs
}

/// True when `short` is obtained from `long` by deleting at least one token.
pub fn is_strict_subsequence(short: &[String], long: &[String]) -> bool {
    if short.len() >= long.len() {
        return false;
    }
    let mut it = long.iter();
    short.iter().all(|t| it.any(|u| u == t))
}

/// Drops generalization pairs, where the target only deletes words of the
/// source.
pub fn filter_generalization_pairs(pairs: &[(String, String)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .filter(|(s, t)| !is_strict_subsequence(&tokenize(t), &tokenize(s)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(ts: u64, user: u64, q: &str, click: Option<Vertical>) -> QueryLogEntry {
        QueryLogEntry {
            timestamp: ts,
            user,
            query: q.to_string(),
            clicked_doc: click.map(|_| 1),
            clicked_vertical: click,
            shown: vec![1],
            satisfied: false,
        }
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn intent_labels_follow_clicks() {
        let mut log: Vec<QueryLogEntry> = (0..7)
            .map(|i| entry(i, 1, "java jobs", Some(Vertical::Job)))
            .collect();
        log.extend((0..3).map(|i| entry(10 + i, 1, "x", None)));
        let labels = derive_intent_labels(&log);
        assert_eq!(labels.len(), 7);
        assert!(labels.iter().all(|(_, v)| *v == Vertical::Job));
    }

    #[test]
    fn help_clicks_are_not_intent_labels() {
        let log = vec![entry(0, 1, "hide profile", Some(Vertical::Help))];
        assert!(derive_intent_labels(&log).is_empty());
    }

    #[test]
    fn session_boundary() {
        let log = vec![
            entry(0, 1, "data scientist", None),
            entry(599, 1, "data engineer", None),
            entry(1200, 1, "data analyst", None),
        ];
        assert_eq!(mine_suggestion_pairs(&log), vec![pair("data scientist", "data engineer")]);
    }

    #[test]
    fn unrelated_queries_are_not_paired() {
        let log = vec![entry(0, 1, "doctor", None), entry(10, 1, "lawyer", None)];
        assert!(mine_suggestion_pairs(&log).is_empty());
    }

    #[test]
    fn users_do_not_mix() {
        let log = vec![entry(0, 1, "data scientist", None), entry(5, 2, "data engineer", None)];
        assert!(mine_suggestion_pairs(&log).is_empty());
    }

    #[test]
    fn generalization_examples() {
        let pairs = vec![
            pair("senior research scientist", "research scientist"),
            pair("research scientist", "scientist"),
            pair("scientist", "research scientist"),
        ];
        assert_eq!(filter_generalization_pairs(&pairs), vec![pair("scientist", "research scientist")]);
    }

    fn query() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 1..5).prop_map(|v| v.join(" "))
    }

    /// Subsequence oracle: enumerate every deletion mask of the long side.
    fn subsequence_oracle(short: &[String], long: &[String]) -> bool {
        (0u32..(1 << long.len())).any(|mask| {
            let kept: Vec<&String> = long
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t)
                .collect();
            kept.len() < long.len() && kept.len() == short.len() && kept.iter().zip(short).all(|(a, b)| *a == b)
        })
    }

    proptest! {
        #[test]
        fn subsequence_matches_enumeration(a in query(), b in query()) {
            let (ta, tb) = (tokenize(&a), tokenize(&b));
            prop_assert_eq!(is_strict_subsequence(&ta, &tb), subsequence_oracle(&ta, &tb));
        }

        #[test]
        fn filter_output_has_no_generalizations(pairs in prop::collection::vec((query(), query()), 0..20)) {
            for (s, t) in filter_generalization_pairs(&pairs) {
                prop_assert!(!is_strict_subsequence(&tokenize(&t), &tokenize(&s)));
            }
        }

        #[test]
        fn mined_pairs_satisfy_predicates(
            raw in prop::collection::vec((0u64..3, 0u64..900, query()), 0..30)
        ) {
            let mut log: Vec<QueryLogEntry> = Vec::new();
            let mut clock = [0u64; 3];
            for (u, gap, q) in raw {
                clock[u as usize] += gap;
                log.push(entry(clock[u as usize], u, &q, None));
            }
            let mut candidates = HashSet::new();
            for u in 0..3 {
                let mine: Vec<&QueryLogEntry> = log.iter().filter(|e| e.user == u).collect();
                for w in mine.windows(2) {
                    candidates.insert((w[0].query.clone(), w[1].query.clone(), w[1].timestamp - w[0].timestamp));
                }
            }
            for (s, t) in mine_suggestion_pairs(&log) {
                let ok = candidates.iter().any(|(a, b, gap)| {
                    *a == s && *b == t && *gap <= SESSION_GAP_SECS
                        && tokenize(a).iter().any(|x| tokenize(b).contains(x))
                });
                prop_assert!(ok);
            }
        }
    }
}
