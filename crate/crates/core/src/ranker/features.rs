//! Keyword-matching features shared by the linear first pass and the deep
//! ranker.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::data::DocumentRecord;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::text::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Non-negative BM25 inverse document frequency.
pub fn bm25_idf(df: u64, n_docs: u64) -> f64 {
    let (df, n) = (df as f64, n_docs as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub fn bm25_term(tf: f64, df: u64, n_docs: u64, doc_len: f64, avg_len: f64) -> f64 {
    let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len / avg_len.max(1e-9));
    bm25_idf(df, n_docs) * tf * (BM25_K1 + 1.0) / (tf + norm)
}

/// Documents by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: HashMap<u64, DocumentRecord>,
}

impl Corpus {
    pub fn new(docs: impl IntoIterator<Item = DocumentRecord>) -> Self {
        Corpus {
            docs: docs.into_iter().map(|d| (d.id, d)).collect(),
        }
    }

    pub fn get(&self, id: u64) -> Result<&DocumentRecord> {
        self.docs.get(&id).ok_or(Error::MissingDocument(id))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.docs.values()
    }
}

/// Collection statistics plus a per-feature standardization fitted on
/// training pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    fields: Vec<String>,
    df: HashMap<String, u64>,
    n_docs: u64,
    avg_len: f64,
    clicks: HashMap<u64, u64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new<'a>(
        fields: &[&str],
        docs: impl IntoIterator<Item = &'a DocumentRecord>,
        clicks: HashMap<u64, u64>,
    ) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::invalid("ranker needs at least one document field"));
        }
        let mut df: HashMap<String, u64> = HashMap::new();
        let mut n_docs = 0u64;
        let mut total_len = 0usize;
        for d in docs {
            let toks = d.all_tokens();
            total_len += toks.len();
            n_docs += 1;
            for t in toks.into_iter().collect::<HashSet<_>>() {
                *df.entry(t).or_default() += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::invalid("no documents for collection statistics"));
        }
        let dim = 2 * fields.len() + 3;
        Ok(FeatureExtractor {
            fields: fields.iter().map(|s| s.to_string()).collect(),
            df,
            n_docs,
            avg_len: total_len as f64 / n_docs as f64,
            clicks,
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        })
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    /// Per field: TF-IDF cosine and exact-match fraction; then BM25 over
    /// all fields, log click popularity, query length.
    pub fn dim(&self) -> usize {
        2 * self.fields.len() + 3
    }

    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.fields.iter().map(|f| format!("tfidf_cos.{f}")).collect();
        out.extend(self.fields.iter().map(|f| format!("exact_frac.{f}")));
        out.extend(["bm25", "log_clicks", "query_len"].map(String::from));
        out
    }

    fn idf(&self, t: &str) -> f64 {
        let df = self.df.get(t).copied().unwrap_or(0) as f64;
        ((1.0 + self.n_docs as f64) / (1.0 + df)).ln() + 1.0
    }

    fn tfidf<'t>(&self, toks: &'t [String]) -> BTreeMap<&'t str, f64> {
        let mut v: BTreeMap<&str, f64> = BTreeMap::new();
        for t in toks {
            *v.entry(t.as_str()).or_default() += 1.0;
        }
        for (t, x) in v.iter_mut() {
            *x *= self.idf(t);
        }
        v
    }

    /// Unscaled feature vector.
    pub fn raw(&self, query: &str, doc: &DocumentRecord) -> Vec<f64> {
        let q = tokenize(query);
        let qv = self.tfidf(&q);
        let q_norm = qv.values().map(|x| x * x).sum::<f64>().sqrt();
        let q_set: HashSet<&str> = q.iter().map(String::as_str).collect();
        let mut cos = Vec::with_capacity(self.fields.len());
        let mut exact = Vec::with_capacity(self.fields.len());
        for f in &self.fields {
            let toks = tokenize(doc.field(f));
            let dv = self.tfidf(&toks);
            let d_norm = dv.values().map(|x| x * x).sum::<f64>().sqrt();
            let num: f64 = qv.iter().filter_map(|(t, x)| dv.get(t).map(|y| x * y)).sum();
            cos.push(if q_norm > 0.0 && d_norm > 0.0 { num / (q_norm * d_norm) } else { 0.0 });
            let present: HashSet<&str> = toks.iter().map(String::as_str).collect();
            exact.push(if q_set.is_empty() {
                0.0
            } else {
                q_set.iter().filter(|t| present.contains(*t)).count() as f64 / q_set.len() as f64
            });
        }
        let all = doc.all_tokens();
        let mut tf: HashMap<&str, f64> = HashMap::new();
        for t in &all {
            *tf.entry(t.as_str()).or_default() += 1.0;
        }
        let bm25: f64 = q
            .iter()
            .filter_map(|t| {
                tf.get(t.as_str()).map(|&c| {
                    let df = self.df.get(t).copied().unwrap_or(0);
                    bm25_term(c, df, self.n_docs, all.len() as f64, self.avg_len)
                })
            })
            .sum();
        let clicks = self.clicks.get(&doc.id).copied().unwrap_or(0) as f64;
        let mut out = cos;
        out.extend(exact);
        out.extend([bm25, clicks.ln_1p(), q.len() as f64]);
        out
    }

    /// Standardized feature vector.
    pub fn features(&self, query: &str, doc: &DocumentRecord) -> Vec<f64> {
        let mut v = self.raw(query, doc);
        for (k, x) in v.iter_mut().enumerate() {
            *x = (*x - self.mean[k]) / self.scale[k];
        }
        v
    }

    /// Fits the standardization on raw feature rows.
    pub fn fit_scaling(&mut self, rows: &[Vec<f64>]) {
        let dim = self.dim();
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for k in 0..dim {
            let m = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - m) * (r[k] - m)).sum::<f64>() / n;
            self.mean[k] = m;
            self.scale[k] = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        }
    }

    pub fn to_checkpoint(&self, ckpt: Checkpoint) -> Checkpoint {
        let mut df: Vec<String> = self.df.iter().map(|(t, c)| format!("{t} {c}")).collect();
        df.sort();
        let mut clicks: Vec<String> = self.clicks.iter().map(|(d, c)| format!("{d} {c}")).collect();
        clicks.sort();
        let floats = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        ckpt.with_list("features.fields", &self.fields)
            .with_list("features.df", &df)
            .with_list("features.clicks", &clicks)
            .with_meta("features.n_docs", self.n_docs)
            .with_meta("features.avg_len", self.avg_len)
            .with_list("features.mean", &floats(&self.mean))
            .with_list("features.scale", &floats(&self.scale))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        fn pairs<K: std::str::FromStr + std::hash::Hash + Eq>(items: Vec<String>) -> Result<HashMap<K, u64>> {
            items
                .iter()
                .map(|s| {
                    let (k, v) = s.rsplit_once(' ').ok_or_else(|| Error::format("checkpoint", s.clone()))?;
                    let k = k.parse().map_err(|_| Error::format("checkpoint", s.clone()))?;
                    let v = v.parse().map_err(|_| Error::format("checkpoint", s.clone()))?;
                    Ok((k, v))
                })
                .collect()
        }
        let floats = |key: &str| -> Result<Vec<f64>> {
            ckpt.meta_list(key)?
                .iter()
                .map(|s| s.parse().map_err(|_| Error::format("checkpoint", format!("{key}: {s}"))))
                .collect()
        };
        let fields = ckpt.meta_list("features.fields")?;
        let mean = floats("features.mean")?;
        let scale = floats("features.scale")?;
        let dim = 2 * fields.len() + 3;
        if fields.is_empty() || mean.len() != dim || scale.len() != dim {
            return Err(Error::format("checkpoint", "feature scaling does not match field count"));
        }
        Ok(FeatureExtractor {
            fields,
            df: pairs(ckpt.meta_list("features.df")?)?,
            clicks: pairs(ckpt.meta_list("features.clicks")?)?,
            n_docs: ckpt.meta_parse("features.n_docs")?,
            avg_len: ckpt.meta_parse("features.avg_len")?,
            mean,
            scale,
        })
    }
}
