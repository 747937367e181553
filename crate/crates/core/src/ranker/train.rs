use std::collections::HashMap;

use crate::data::{DocumentRecord, RankingGroup};
use crate::error::Result;
use crate::ranker::features::{Corpus, FeatureExtractor};

/// A training query with its documents sorted by id, standardized features
/// attached.
#[derive(Debug, Clone)]
pub struct PreparedGroup<'a> {
    pub query: String,
    pub docs: Vec<(&'a DocumentRecord, u8, Vec<f64>)>,
}

impl PreparedGroup<'_> {
    pub fn grades(&self) -> Vec<u8> {
        self.docs.iter().map(|d| d.1).collect()
    }
}

/// `(better, worse)` index pairs, enumerated in doc-id order.
pub fn preference_pairs(grades: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..grades.len() {
        for j in i + 1..grades.len() {
            if grades[i] > grades[j] {
                out.push((i, j));
            } else if grades[j] > grades[i] {
                out.push((j, i));
            }
        }
    }
    out
}

/// Builds the feature extractor from the corpus, keeps groups that have at
/// least two documents and one preference pair, sorted by query, and fits
/// feature scaling on them.
pub fn prepare_groups<'a>(
    groups: &[RankingGroup],
    corpus: &'a Corpus,
    fields: &[&str],
    clicks: HashMap<u64, u64>,
) -> Result<(FeatureExtractor, Vec<PreparedGroup<'a>>)> {
    let mut fx = FeatureExtractor::new(fields, corpus.iter(), clicks)?;
    let mut kept: Vec<(String, Vec<(&'a DocumentRecord, u8)>)> = Vec::new();
    let mut skipped = 0usize;
    for g in groups {
        let mut docs: Vec<(&DocumentRecord, u8)> = Vec::with_capacity(g.docs.len());
        for &(id, grade) in &g.docs {
            docs.push((corpus.get(id)?, grade));
        }
        docs.sort_by_key(|d| d.0.id);
        let grades: Vec<u8> = docs.iter().map(|d| d.1).collect();
        if docs.len() < 2 || !g.has_positive() || preference_pairs(&grades).is_empty() {
            skipped += 1;
            continue;
        }
        kept.push((g.query.clone(), docs));
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    if skipped > 0 {
        log::warn!("skipped {skipped} ranking groups without a usable preference pair");
    }
    let rows: Vec<Vec<f64>> = kept
        .iter()
        .flat_map(|(q, docs)| docs.iter().map(|(d, _)| fx.raw(q, d)).collect::<Vec<_>>())
        .collect();
    fx.fit_scaling(&rows);
    let prepared = kept
        .into_iter()
        .map(|(query, docs)| {
            let docs = docs.into_iter().map(|(d, g)| (d, g, fx.features(&query, d))).collect();
            PreparedGroup { query, docs }
        })
        .collect();
    Ok((fx, prepared))
}

/// Evaluation groups with features from an already fitted extractor. Groups
/// need at least two documents and one positive.
pub fn prepare_eval_groups<'a>(
    groups: &[RankingGroup],
    corpus: &'a Corpus,
    fx: &FeatureExtractor,
) -> Result<Vec<PreparedGroup<'a>>> {
    let mut out = Vec::new();
    for g in groups.iter().filter(|g| g.docs.len() >= 2 && g.has_positive()) {
        let mut docs = Vec::with_capacity(g.docs.len());
        for &(id, grade) in &g.docs {
            let d = corpus.get(id)?;
            docs.push((d, grade, fx.features(&g.query, d)));
        }
        docs.sort_by_key(|d| d.0.id);
        out.push(PreparedGroup {
            query: g.query.clone(),
            docs,
        });
    }
    Ok(out)
}
