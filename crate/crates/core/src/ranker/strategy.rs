//! Deployment strategies: deep scoring of every candidate, scoring against
//! precomputed document vectors, and linear first pass with deep reranking
//! of the top K.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::data::DocumentRecord;
use crate::error::{Error, Result};
use crate::ranker::linear::LinearRanker;
use crate::ranker::model::RankerModel;
use crate::ranker::store::PrecomputedScorer;

pub const DEFAULT_K: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Full,
    Precomputed,
    TwoPass,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::Precomputed => "precomputed",
            Strategy::TwoPass => "two-pass",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Strategy::Full, Strategy::Precomputed, Strategy::TwoPass]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ranking strategy {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDoc {
    pub doc: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<RankedDoc>,
    pub strategy: Strategy,
    /// Documents that went through the deep scorer.
    pub deep_evals: usize,
}

impl RankedList {
    pub fn doc_ids(&self) -> Vec<u64> {
        self.items.iter().map(|r| r.doc).collect()
    }
}

/// Descending score, ascending doc id on ties.
pub fn sort_ranked(items: &mut [RankedDoc]) {
    items.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.doc.cmp(&b.doc))
    });
}

fn unique(docs: &[&DocumentRecord]) -> Result<()> {
    let mut ids: Vec<u64> = docs.iter().map(|d| d.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate candidate document"));
    }
    Ok(())
}

pub fn rank_full(model: &RankerModel, query_id: &str, query: &str, docs: &[&DocumentRecord]) -> Result<RankedList> {
    unique(docs)?;
    let q = model.encode_query(query)?;
    let mut items = docs
        .iter()
        .map(|d| Ok(RankedDoc { doc: d.id, score: model.score_doc(query, &q, d)? }))
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut items);
    Ok(RankedList {
        query_id: query_id.to_string(),
        items,
        strategy: Strategy::Full,
        deep_evals: docs.len(),
    })
}

pub fn rank_precomputed(scorer: &PrecomputedScorer<'_>, query_id: &str, query: &str, docs: &[&DocumentRecord]) -> Result<RankedList> {
    unique(docs)?;
    let q = scorer.model().encode_query(query)?;
    let mut items = docs
        .iter()
        .map(|d| Ok(RankedDoc { doc: d.id, score: scorer.score(query, &q, d)? }))
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut items);
    Ok(RankedList {
        query_id: query_id.to_string(),
        items,
        strategy: Strategy::Precomputed,
        deep_evals: 0,
    })
}

pub fn rank_light(light: &LinearRanker, query: &str, docs: &[&DocumentRecord]) -> Vec<RankedDoc> {
    let mut items: Vec<RankedDoc> = docs.iter().map(|d| RankedDoc { doc: d.id, score: light.score(query, d) }).collect();
    sort_ranked(&mut items);
    items
}

/// Linear scores for every candidate, deep scores for the best `k`. The
/// reranked head comes first; the remaining documents keep their linear
/// order, with scores shifted below the lowest deep score.
pub fn rank_two_pass(
    light: &LinearRanker,
    deep: &RankerModel,
    query_id: &str,
    query: &str,
    docs: &[&DocumentRecord],
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::invalid("two-pass K must be at least 1"));
    }
    unique(docs)?;
    let first = rank_light(light, query, docs);
    let cut = k.min(first.len());
    let by_id: std::collections::HashMap<u64, &DocumentRecord> = docs.iter().map(|d| (d.id, *d)).collect();
    let q = deep.encode_query(query)?;
    let mut head = first[..cut]
        .iter()
        .map(|r| Ok(RankedDoc { doc: r.doc, score: deep.score_doc(query, &q, by_id[&r.doc])? }))
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut head);
    let tail = &first[cut..];
    if let (Some(last), Some(top)) = (head.last(), tail.first()) {
        let shift = (last.score - top.score).min(0.0) - 1.0;
        head.extend(tail.iter().map(|r| RankedDoc { doc: r.doc, score: r.score + shift }));
    }
    Ok(RankedList {
        query_id: query_id.to_string(),
        items: head,
        strategy: Strategy::TwoPass,
        deep_evals: cut,
    })
}

/// Rows of query id, doc id, rank, score, strategy.
pub fn write_tsv<W: Write>(out: &mut W, lists: &[RankedList]) -> Result<()> {
    writeln!(out, "query_id\tdoc_id\trank\tscore\tstrategy")?;
    for l in lists {
        for (i, r) in l.items.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{:.6}\t{}", l.query_id, r.doc, i + 1, r.score, l.strategy)?;
        }
    }
    Ok(())
}
