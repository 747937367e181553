//! Inverted index over every document field with BM25 retrieval.

use std::collections::{BTreeMap, HashMap};

use crate::data::{DocumentRecord, Vertical};
use crate::ranker::bm25_term;
use crate::text::tokenize;

pub const DEFAULT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u64,
    /// Index into [`InvertedIndex::fields`].
    pub field: u16,
    pub tf: u32,
}

#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    fields: Vec<String>,
    /// Sorted by doc id, then field.
    postings: HashMap<String, Vec<Posting>>,
    doc_len: BTreeMap<u64, u32>,
    field_len: HashMap<(u64, u16), u32>,
    verticals: HashMap<u64, Vertical>,
    avg_len: f64,
}

impl InvertedIndex {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a DocumentRecord>) -> Self {
        let mut docs: Vec<&DocumentRecord> = docs.into_iter().collect();
        docs.sort_by_key(|d| d.id);
        let mut fields: Vec<String> = docs.iter().flat_map(|d| d.fields.keys().cloned()).collect();
        fields.sort();
        fields.dedup();
        let field_ix: HashMap<&str, u16> = fields.iter().enumerate().map(|(i, f)| (f.as_str(), i as u16)).collect();

        let mut idx = InvertedIndex::default();
        for d in &docs {
            let mut total = 0u32;
            for (name, text) in &d.fields {
                let f = field_ix[name.as_str()];
                let toks = tokenize(text);
                total += toks.len() as u32;
                idx.field_len.insert((d.id, f), toks.len() as u32);
                let mut tf: BTreeMap<String, u32> = BTreeMap::new();
                for t in toks {
                    *tf.entry(t).or_default() += 1;
                }
                for (t, n) in tf {
                    idx.postings.entry(t).or_default().push(Posting { doc: d.id, field: f, tf: n });
                }
            }
            idx.doc_len.insert(d.id, total);
            idx.verticals.insert(d.id, d.vertical);
        }
        let n = idx.doc_len.len().max(1) as f64;
        idx.avg_len = idx.doc_len.values().map(|&l| f64::from(l)).sum::<f64>() / n;
        idx.fields = fields;
        idx
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn doc_count(&self) -> usize {
        self.doc_len.len()
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn field_len(&self, doc: u64, field: u16) -> u32 {
        self.field_len.get(&(doc, field)).copied().unwrap_or(0)
    }

    pub fn vertical(&self, doc: u64) -> Option<Vertical> {
        self.verticals.get(&doc).copied()
    }

    /// Number of distinct documents containing `token` in any field.
    pub fn doc_freq(&self, token: &str) -> u64 {
        let mut n = 0;
        let mut last = None;
        for p in self.postings(token) {
            if last != Some(p.doc) {
                n += 1;
                last = Some(p.doc);
            }
        }
        n
    }

    /// BM25 over all fields concatenated; documents with at least one query
    /// token, best `limit` first, ties by ascending id.
    pub fn retrieve(&self, query: &str, limit: usize, vertical: Option<Vertical>) -> Vec<(u64, f64)> {
        let mut q = tokenize(query);
        q.sort();
        q.dedup();
        let n_docs = self.doc_count() as u64;
        let mut scores: HashMap<u64, f64> = HashMap::new();
        for t in &q {
            let df = self.doc_freq(t);
            let mut tf: BTreeMap<u64, u32> = BTreeMap::new();
            for p in self.postings(t) {
                *tf.entry(p.doc).or_default() += p.tf;
            }
            for (doc, c) in tf {
                if vertical.is_some_and(|v| self.verticals.get(&doc) != Some(&v)) {
                    continue;
                }
                let dl = f64::from(self.doc_len[&doc]);
                *scores.entry(doc).or_default() += bm25_term(f64::from(c), df, n_docs, dl, self.avg_len);
            }
        }
        let mut out: Vec<(u64, f64)> = scores.into_iter().collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        out.truncate(limit);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: u64, v: Vertical, fields: &[(&str, &str)]) -> DocumentRecord {
        DocumentRecord {
            id,
            vertical: v,
            fields: fields.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    fn toy() -> Vec<DocumentRecord> {
        vec![
            doc(1, Vertical::People, &[("name", "ann lee"), ("title", "data scientist")]),
            doc(2, Vertical::People, &[("name", "bo data"), ("title", "data data engineer")]),
            doc(3, Vertical::Job, &[("title", "nurse"), ("company", "acme")]),
        ]
    }

    #[test]
    fn absent_token_gives_nothing() {
        let idx = InvertedIndex::build(&toy());
        assert!(idx.retrieve("zebra", 10, None).is_empty());
        assert!(idx.retrieve("", 10, None).is_empty());
    }

    #[test]
    fn single_token_returns_its_posting_docs() {
        let idx = InvertedIndex::build(&toy());
        let mut ids: Vec<u64> = idx.retrieve("data", 10, None).iter().map(|r| r.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(idx.retrieve("data", 1, None).len(), 1);
        assert!(idx.retrieve("data", 10, Some(Vertical::Job)).is_empty());
    }

    #[test]
    fn bm25_matches_hand_computation() {
        let idx = InvertedIndex::build(&toy());
        // lengths 4, 5, 2 -> avg 11/3; "data": df 2 of 3
        let (k1, b, avg) = (1.2f64, 0.75f64, 11.0 / 3.0);
        let idf = (1.0f64 + (3.0 - 2.0 + 0.5) / (2.0 + 0.5)).ln();
        let w = |tf: f64, dl: f64| idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg));
        let got = idx.retrieve("data", 10, None);
        assert_eq!(got[0].0, 2);
        assert!((got[0].1 - w(3.0, 5.0)).abs() < 1e-12);
        assert!((got[1].1 - w(1.0, 4.0)).abs() < 1e-12);
    }

    #[test]
    fn postings_are_sorted_by_doc() {
        let idx = InvertedIndex::build(toy().iter().rev());
        let p = idx.postings("data");
        assert!(p.windows(2).all(|w| (w[0].doc, w[0].field) < (w[1].doc, w[1].field)));
        let title = idx.fields().iter().position(|f| f == "title").unwrap() as u16;
        assert_eq!(idx.field_len(2, title), 3);
    }

    #[test]
    fn ties_break_by_id() {
        let docs = vec![
            doc(9, Vertical::Job, &[("title", "nurse")]),
            doc(4, Vertical::Job, &[("title", "nurse")]),
        ];
        let idx = InvertedIndex::build(&docs);
        let ids: Vec<u64> = idx.retrieve("nurse", 10, None).iter().map(|r| r.0).collect();
        assert_eq!(ids, vec![4, 9]);
    }
}
