//! Document ranking: keyword features, a linear first pass, the deep
//! multi-field ranker and its deployment strategies.

pub mod features;
pub mod linear;
pub mod model;
pub mod store;
pub mod strategy;
pub mod train;

pub use features::{bm25_idf, bm25_term, Corpus, FeatureExtractor, BM25_B, BM25_K1};
pub use linear::LinearRanker;
pub use model::{cosine, DocRepr, RankerConfig, RankerModel, TextRepr};
pub use store::{EmbeddingStore, PrecomputedScorer};
pub use strategy::{
    rank_full, rank_light, rank_precomputed, rank_two_pass, sort_ranked, write_tsv, RankedDoc, RankedList, Strategy,
    DEFAULT_K,
};
pub use train::{preference_pairs, prepare_eval_groups, prepare_groups, PreparedGroup};

use crate::error::Result;
use crate::evalbench::metrics::ndcg_at_10;

/// Mean NDCG@10 of a scoring function over prepared groups, ties broken by
/// ascending doc id.
pub fn mean_ndcg<F>(groups: &[PreparedGroup<'_>], mut score: F) -> Result<f64>
where
    F: FnMut(&PreparedGroup<'_>, usize) -> Result<f64>,
{
    if groups.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for g in groups {
        let mut items = Vec::with_capacity(g.docs.len());
        for (i, (d, _, _)) in g.docs.iter().enumerate() {
            items.push((RankedDoc { doc: d.id, score: score(g, i)? }, g.docs[i].1));
        }
        items.sort_by(|a, b| {
            b.0.score
                .partial_cmp(&a.0.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.doc.cmp(&b.0.doc))
        });
        let grades: Vec<u8> = items.iter().map(|x| x.1).collect();
        total += ndcg_at_10(&grades);
    }
    Ok(total / groups.len() as f64)
}
