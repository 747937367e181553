//! Deep ranker: a shared CNN text encoder with one projection per document
//! field, per-field cosine similarities joined with keyword features, one
//! hidden layer, scalar score.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::DocumentRecord;
use crate::error::{Error, Result};
use crate::nn::layers::{tanh_backward, tanh_in_place, ConvCache};
use crate::nn::{
    axpy, dot, pairwise_logistic, seeded_rng, Adam, AdamConfig, Checkpoint, Conv1d, Dense, Embedding, ParamId, ParamSet, Tensor,
};
use crate::ranker::features::{Corpus, FeatureExtractor};
use crate::ranker::mean_ndcg;
use crate::ranker::train::{preference_pairs, PreparedGroup};
use crate::text::{tokenize, Vocabulary, PAD};

pub const CHECKPOINT_KIND: &str = "ranker";

#[derive(Debug, Clone, PartialEq)]
pub struct RankerConfig {
    pub embedding_dim: usize,
    pub filters: usize,
    pub width: usize,
    pub hidden: usize,
    pub max_vocab: usize,
    pub epochs: usize,
    /// Query groups per update.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            embedding_dim: 64,
            filters: 64,
            width: 3,
            hidden: 32,
            max_vocab: crate::text::vocab::DEFAULT_MAX_SIZE,
            epochs: 5,
            batch_size: 16,
            learning_rate: 0.003,
            seed: 1,
        }
    }
}

/// Encoded text: pooled CNN output and its projection into every field.
#[derive(Debug, Clone)]
pub struct TextRepr {
    ids: Vec<usize>,
    cache: ConvCache,
    pooled: Vec<f64>,
    /// One tanh-projected vector per field.
    pub proj: Vec<Vec<f64>>,
}

/// A document as seen by the head: one encoding per field.
#[derive(Debug, Clone)]
pub struct DocRepr {
    fields: Vec<TextRepr>,
}

impl DocRepr {
    pub fn vectors(&self) -> Vec<&[f64]> {
        self.fields.iter().enumerate().map(|(f, r)| r.proj[f].as_slice()).collect()
    }
}

struct Head {
    x: Vec<f64>,
    hidden: Vec<f64>,
    score: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Gradients of `cosine(a, b)` scaled by `dc`, accumulated into `da`, `db`.
fn cosine_backward(a: &[f64], b: &[f64], dc: f64, da: &mut [f64], db: &mut [f64]) {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na < 1e-12 || nb < 1e-12 {
        return;
    }
    let c = dot(a, b) / (na * nb);
    for k in 0..a.len() {
        da[k] += dc * (b[k] / (na * nb) - c * a[k] / (na * na));
        db[k] += dc * (a[k] / (na * nb) - c * b[k] / (nb * nb));
    }
}

#[derive(Debug, Clone)]
pub struct RankerModel {
    vocab: Vocabulary,
    features: FeatureExtractor,
    params: ParamSet,
    emb: Embedding,
    conv: Conv1d,
    field_proj: Vec<Dense>,
    hidden: Dense,
    /// Scoring weights; no bias, the pairwise loss cannot see a shift.
    out: ParamId,
}

impl RankerModel {
    pub fn new(vocab: Vocabulary, features: FeatureExtractor, cfg: &RankerConfig) -> Self {
        let mut rng = seeded_rng(cfg.seed);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "rank.emb", vocab.len(), cfg.embedding_dim, &mut rng);
        let conv = Conv1d::new(&mut params, "rank.conv", cfg.filters, cfg.width, cfg.embedding_dim, &mut rng);
        let field_proj = (0..features.fields().len())
            .map(|f| Dense::new(&mut params, &format!("rank.field{f}"), cfg.filters, cfg.filters, &mut rng))
            .collect::<Vec<_>>();
        // keeps field vectors away from the origin when no filter fires
        for d in &field_proj {
            for b in params[d.bias].data_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let input = field_proj.len() + features.dim();
        let hidden = Dense::new(&mut params, "rank.hidden", input, cfg.hidden, &mut rng);
        let out = params.add("rank.out.weight", Tensor::xavier(1, cfg.hidden, &mut rng));
        RankerModel {
            vocab,
            features,
            params,
            emb,
            conv,
            field_proj,
            hidden,
            out,
        }
    }

    /// Vocabulary over training queries and every field of every document.
    pub fn build_vocab(groups: &[PreparedGroup<'_>], corpus: &Corpus, max_vocab: usize) -> Result<Vocabulary> {
        let mut docs: Vec<&DocumentRecord> = corpus.iter().collect();
        docs.sort_by_key(|d| d.id);
        let mut corpus_toks: Vec<Vec<String>> = groups.iter().map(|g| tokenize(&g.query)).collect();
        corpus_toks.extend(docs.iter().map(|d| d.all_tokens()));
        Vocabulary::build(&corpus_toks, max_vocab)
    }

    pub fn features(&self) -> &FeatureExtractor {
        &self.features
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn field_count(&self) -> usize {
        self.field_proj.len()
    }

    /// Width of each field vector.
    pub fn vector_dim(&self) -> usize {
        self.conv.filters
    }

    fn encode_with(&self, params: &ParamSet, text: &str, only_field: Option<usize>) -> Result<TextRepr> {
        let mut ids = self.vocab.encode(&tokenize(text));
        if ids.is_empty() {
            ids.push(PAD);
        }
        let x = self.emb.forward(params, &ids)?;
        let (pooled, cache) = self.conv.forward(params, &x)?;
        let proj = self
            .field_proj
            .iter()
            .enumerate()
            .map(|(f, d)| {
                if only_field.is_some_and(|o| o != f) {
                    return Vec::new();
                }
                let mut v = d.forward(params, &pooled);
                tanh_in_place(&mut v);
                v
            })
            .collect();
        Ok(TextRepr {
            ids,
            cache,
            pooled,
            proj,
        })
    }

    pub fn encode_query(&self, query: &str) -> Result<TextRepr> {
        self.encode_with(&self.params, query, None)
    }

    /// One document encoder pass per field.
    pub fn encode_doc(&self, doc: &DocumentRecord) -> Result<DocRepr> {
        self.encode_doc_with(&self.params, doc)
    }

    fn encode_doc_with(&self, params: &ParamSet, doc: &DocumentRecord) -> Result<DocRepr> {
        let fields = self
            .features
            .fields()
            .iter()
            .enumerate()
            .map(|(f, name)| self.encode_with(params, doc.field(name), Some(f)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DocRepr { fields })
    }

    fn head(&self, params: &ParamSet, query: &TextRepr, doc_vectors: &[&[f64]], feats: &[f64]) -> Head {
        let mut x: Vec<f64> = doc_vectors
            .iter()
            .enumerate()
            .map(|(f, d)| cosine(&query.proj[f], d))
            .collect();
        x.extend_from_slice(feats);
        let mut hidden = self.hidden.forward(params, &x);
        tanh_in_place(&mut hidden);
        let score = dot(params[self.out].row(0), &hidden);
        Head { x, hidden, score }
    }

    /// Score from already-encoded parts; `doc_vectors` holds one vector per
    /// field, e.g. read back from an embedding store.
    pub fn score_encoded(&self, query: &TextRepr, doc_vectors: &[&[f64]], feats: &[f64]) -> f64 {
        self.head(&self.params, query, doc_vectors, feats).score
    }

    /// Per-field cosine similarities between query and document.
    pub fn field_cosines(&self, query: &TextRepr, doc: &DocRepr) -> Vec<f64> {
        doc.vectors().iter().enumerate().map(|(f, d)| cosine(&query.proj[f], d)).collect()
    }

    /// Encodes the document and scores it against an encoded query.
    pub fn score_doc(&self, query: &str, encoded: &TextRepr, doc: &DocumentRecord) -> Result<f64> {
        let d = self.encode_doc(doc)?;
        let feats = self.features.features(query, doc);
        Ok(self.score_encoded(encoded, &d.vectors(), &feats))
    }

    pub fn score_full(&self, query: &str, doc: &DocumentRecord) -> Result<f64> {
        let q = self.encode_query(query)?;
        self.score_doc(query, &q, doc)
    }

    fn backward_text(&self, params: &ParamSet, grads: &mut ParamSet, repr: &TextRepr, d_proj: &[(usize, Vec<f64>)]) {
        let mut d_pooled = vec![0.0; repr.pooled.len()];
        for (f, dp) in d_proj {
            let d_pre = tanh_backward(&repr.proj[*f], dp);
            let d = self.field_proj[*f].backward(params, grads, &repr.pooled, &d_pre);
            d_pooled.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        let d_x = self.conv.backward(params, grads, &repr.cache, &d_pooled);
        self.emb.backward(grads, &repr.ids, &d_x);
    }

    /// Sum of pairwise logistic losses over the group's preference pairs.
    pub fn group_loss(&self, params: &ParamSet, group: &PreparedGroup<'_>, grads: Option<&mut ParamSet>) -> Result<(f64, usize)> {
        let q = self.encode_with(params, &group.query, None)?;
        let docs = group
            .docs
            .iter()
            .map(|(d, _, _)| self.encode_doc_with(params, d))
            .collect::<Result<Vec<_>>>()?;
        let heads: Vec<Head> = docs
            .iter()
            .zip(&group.docs)
            .map(|(d, (_, _, feats))| self.head(params, &q, &d.vectors(), feats))
            .collect();
        let pairs = preference_pairs(&group.grades());
        let mut loss = 0.0;
        let mut d_score = vec![0.0; docs.len()];
        for &(p, n) in &pairs {
            let (l, d) = pairwise_logistic(heads[p].score, heads[n].score);
            loss += l;
            d_score[p] += d;
            d_score[n] -= d;
        }
        let Some(grads) = grads else {
            return Ok((loss, pairs.len()));
        };
        let fields = self.field_proj.len();
        let mut d_query: Vec<Vec<f64>> = vec![vec![0.0; self.conv.filters]; fields];
        for ((doc, head), &ds) in docs.iter().zip(&heads).zip(&d_score) {
            if ds == 0.0 {
                continue;
            }
            axpy(ds, &head.hidden, grads[self.out].row_mut(0));
            let d_hidden: Vec<f64> = params[self.out].row(0).iter().map(|w| w * ds).collect();
            let d_pre = tanh_backward(&head.hidden, &d_hidden);
            let d_x = self.hidden.backward(params, grads, &head.x, &d_pre);
            for (f, field) in doc.fields.iter().enumerate() {
                let mut d_doc = vec![0.0; self.conv.filters];
                cosine_backward(&q.proj[f], &field.proj[f], d_x[f], &mut d_query[f], &mut d_doc);
                self.backward_text(params, grads, field, &[(f, d_doc)]);
            }
        }
        let d_query: Vec<(usize, Vec<f64>)> = d_query.into_iter().enumerate().collect();
        self.backward_text(params, grads, &q, &d_query);
        Ok((loss, pairs.len()))
    }

    /// Pairwise training. When `valid` is non-empty the parameters from the
    /// epoch with the best validation NDCG@10 are kept.
    pub fn train(
        groups: &[PreparedGroup<'_>],
        valid: &[PreparedGroup<'_>],
        corpus: &Corpus,
        features: FeatureExtractor,
        cfg: &RankerConfig,
    ) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("no ranking groups with a preference pair"));
        }
        let vocab = Self::build_vocab(groups, corpus, cfg.max_vocab)?;
        let mut model = RankerModel::new(vocab, features, cfg);
        let mut adam = Adam::new(
            &model.params,
            AdamConfig {
                learning_rate: cfg.learning_rate,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
        );
        let mut order: Vec<usize> = (0..groups.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0x4a2);
        let mut grads = model.params.zeros_like();
        let mut best: Option<(f64, ParamSet)> = None;
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let (mut total, mut count) = (0.0, 0usize);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                let mut n = 0;
                for &i in batch {
                    let (l, k) = model.group_loss(&model.params, &groups[i], Some(&mut grads))?;
                    total += l;
                    n += k;
                }
                if !total.is_finite() {
                    return Err(Error::Diverged(format!("ranker loss is {total}")));
                }
                count += n;
                grads.scale(1.0 / n.max(1) as f64);
                adam.step(&mut model.params, &grads)?;
            }
            log::info!("ranker epoch {epoch}: pair loss {:.4}", total / count.max(1) as f64);
            if !valid.is_empty() {
                let ndcg = mean_ndcg(valid, |g, i| model.score_full(&g.query, g.docs[i].0))?;
                log::info!("ranker epoch {epoch}: validation ndcg@10 {ndcg:.4}");
                if best.as_ref().is_none_or(|(b, _)| ndcg > *b) {
                    best = Some((ndcg, model.params.clone()));
                }
            }
        }
        if let Some((_, params)) = best {
            model.params = params;
        }
        Ok(model)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let ckpt = Checkpoint::new(CHECKPOINT_KIND, self.params.clone())
            .with_meta("width", self.conv.width)
            .with_list("vocab", self.vocab.tokens());
        self.features.to_checkpoint(ckpt)
    }

    /// Hash of the serialized checkpoint; embedding stores record it.
    pub fn checkpoint_hash(&self) -> String {
        self.to_checkpoint().hash()
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
        let features = FeatureExtractor::from_checkpoint(&ckpt)?;
        let width = ckpt.meta_parse("width")?;
        let params = ckpt.params;
        let emb = Embedding::bind(&params, "rank.emb")?;
        let conv = Conv1d::bind(&params, "rank.conv", width)?;
        let field_proj = (0..features.fields().len())
            .map(|f| Dense::bind(&params, &format!("rank.field{f}")))
            .collect::<Result<Vec<_>>>()?;
        let hidden = Dense::bind(&params, "rank.hidden")?;
        let out = params.id_with_shape("rank.out.weight", 1, hidden.output)?;
        if emb.vocab != vocab.len() || hidden.input != field_proj.len() + features.dim() {
            return Err(Error::format("checkpoint", "ranker layer sizes disagree"));
        }
        Ok(RankerModel {
            vocab,
            features,
            params,
            emb,
            conv,
            field_proj,
            hidden,
            out,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
