//! Request handling for every endpoint. All model state is read-only after
//! construction; the engine is shared across requests behind an `Arc`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::autocomplete::{CompletionIndex, LanguageModel, Ranker, RankerKind, ScoredCandidate};
use crate::data::formats::{read_documents, read_file};
use crate::data::{DocumentRecord, Vertical};
use crate::error::{Error, Result};
use crate::intent::{IntentClassifier, IntentModel};
use crate::ranker::{
    rank_full, rank_precomputed, rank_two_pass, sort_ranked, Corpus, EmbeddingStore, LinearRanker, PrecomputedScorer,
    RankedDoc, RankedList, RankerModel, Strategy,
};
use crate::serving::config::{files, ServingConfig, SuggestMode};
use crate::serving::index::InvertedIndex;
use crate::suggest::{DecodeConfig, PairTable, Seq2SeqModel, Suggestion};
use crate::tagger::Tagger;
use crate::text::tokenize;

/// Every loaded artifact. Missing ones make the endpoints that need them
/// answer with [`Error::Unavailable`].
#[derive(Default)]
pub struct Models {
    pub intent: Option<IntentModel>,
    pub tagger: Option<Tagger>,
    pub completion: Option<CompletionIndex>,
    pub lm: Option<LanguageModel>,
    pub seq2seq: Option<Arc<Seq2SeqModel>>,
    pub pair_table: Option<Arc<PairTable>>,
    pub ranker: Option<RankerModel>,
    pub linear: Option<LinearRanker>,
    pub store: Option<EmbeddingStore>,
}

impl Models {
    /// Loads whatever exists in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        fn opt<T>(path: std::path::PathBuf, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
            if path.exists() {
                load(&path).map(Some)
            } else {
                log::warn!("{} not found; dependent endpoints are unavailable", path.display());
                Ok(None)
            }
        }
        Ok(Models {
            intent: opt(dir.join(files::INTENT), IntentModel::load)?,
            tagger: opt(dir.join(files::TAGGER), Tagger::load)?,
            completion: opt(dir.join(files::COMPLETION), CompletionIndex::load_dir)?,
            lm: opt(dir.join(files::LM), LanguageModel::load)?,
            seq2seq: opt(dir.join(files::SEQ2SEQ), Seq2SeqModel::load)?.map(Arc::new),
            pair_table: opt(dir.join(files::PAIR_TABLE), PairTable::load)?.map(Arc::new),
            ranker: opt(dir.join(files::RANKER), RankerModel::load)?,
            linear: opt(dir.join(files::RANKER_LINEAR), LinearRanker::load)?,
            store: opt(dir.join(files::EMBEDDING_STORE), EmbeddingStore::load)?,
        })
    }
}

fn missing(what: &str) -> Error {
    Error::Unavailable(format!("{what} model not loaded"))
}

/// One request to any endpoint; also the line format of recorded workloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "endpoint", rename_all = "snake_case")]
pub enum Request {
    Autocomplete {
        prefix: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ranker: Option<String>,
    },
    Search {
        q: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vertical: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strategy: Option<String>,
    },
    Suggest {
        q: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<String>,
    },
    Tag {
        q: String,
    },
    Intent {
        q: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocompleteResponse {
    pub prefix: String,
    pub ranker: RankerKind,
    pub candidates: Vec<ScoredCandidate>,
    pub timings_us: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagSpan {
    pub start: usize,
    pub end: usize,
    pub entity: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagResponse {
    pub query: String,
    pub tokens: Vec<String>,
    pub spans: Vec<TagSpan>,
    pub timings_us: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentResponse {
    pub query: String,
    pub top: String,
    pub probabilities: BTreeMap<String, f64>,
    pub timings_us: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuggestResponse {
    pub query: String,
    pub mode: String,
    pub suggestions: Vec<Suggestion>,
    /// Whether the query produced any suggestion.
    pub covered: bool,
    pub timings_us: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionStatus {
    Ok,
    /// Deadline elapsed before decoding finished; suggestions are empty.
    Timeout,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub doc_id: u64,
    pub vertical: String,
    pub score: f64,
    pub fields: BTreeMap<String, String>,
}

/// The part of a search response that does not depend on the suggestion
/// branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResults {
    pub query: String,
    pub vertical: Option<String>,
    pub strategy: Strategy,
    pub intent: BTreeMap<String, f64>,
    pub tags: Vec<TagSpan>,
    pub retrieved: usize,
    pub deep_evals: usize,
    pub results: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResponse {
    #[serde(flatten)]
    pub search: SearchResults,
    pub suggestions: Vec<Suggestion>,
    pub suggestion_status: SuggestionStatus,
    pub timings_us: BTreeMap<String, u64>,
}

fn micros(d: Duration) -> u64 {
    d.as_micros().min(u128::from(u64::MAX)) as u64
}

pub struct Engine {
    cfg: ServingConfig,
    models: Models,
    corpus: Corpus,
    index: InvertedIndex,
}

impl Engine {
    /// Fails when an embedding store does not belong to the loaded ranker.
    pub fn new(cfg: ServingConfig, models: Models, docs: Vec<DocumentRecord>) -> Result<Self> {
        if let (Some(r), Some(s)) = (&models.ranker, &models.store) {
            PrecomputedScorer::new(r, s)?;
        }
        let index = InvertedIndex::build(&docs);
        Ok(Engine {
            cfg,
            models,
            corpus: Corpus::new(docs),
            index,
        })
    }

    pub fn load(cfg: ServingConfig) -> Result<Self> {
        let docs = read_documents(&read_file(&cfg.data_dir.join(files::DOCUMENTS))?)?;
        let models = Models::load_dir(&cfg.model_dir)?;
        Self::new(cfg, models, docs)
    }

    pub fn config(&self) -> &ServingConfig {
        &self.cfg
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Loaded-or-not per model, for the health endpoint.
    pub fn health(&self) -> BTreeMap<&'static str, bool> {
        let m = &self.models;
        BTreeMap::from([
            ("intent", m.intent.is_some()),
            ("tagger", m.tagger.is_some()),
            ("completion", m.completion.is_some()),
            ("lm", m.lm.is_some()),
            ("seq2seq", m.seq2seq.is_some()),
            ("pair_table", m.pair_table.is_some()),
            ("ranker", m.ranker.is_some()),
            ("ranker_linear", m.linear.is_some()),
            ("embedding_store", m.store.is_some()),
        ])
    }

    pub fn handle(&self, req: &Request) -> Result<Value> {
        let v = match req {
            Request::Autocomplete { prefix, n, ranker } => {
                let kind = ranker.as_deref().map(str::parse).transpose()?;
                serde_json::to_value(self.autocomplete(prefix, n.unwrap_or(self.cfg.autocomplete_max_n), kind)?)
            }
            Request::Search {
                q,
                vertical,
                size,
                strategy,
            } => {
                let vertical = vertical.as_deref().filter(|s| !s.is_empty()).map(str::parse).transpose()?;
                let strategy = strategy.as_deref().map(str::parse).transpose()?;
                serde_json::to_value(self.search(q, vertical, size.unwrap_or(self.cfg.page_size), strategy)?)
            }
            Request::Suggest { q, mode } => {
                let mode = mode.as_deref().map(str::parse).transpose()?;
                serde_json::to_value(self.suggest(q, mode)?)
            }
            Request::Tag { q } => serde_json::to_value(self.tag(q)?),
            Request::Intent { q } => serde_json::to_value(self.intent(q)?),
        };
        Ok(v?)
    }

    pub fn autocomplete(&self, prefix: &str, max_n: usize, kind: Option<RankerKind>) -> Result<AutocompleteResponse> {
        let start = Instant::now();
        let index = self.models.completion.as_ref().ok_or_else(|| missing("completion index"))?;
        let kind = kind.unwrap_or(self.cfg.autocomplete_ranker);
        let ranker = match kind {
            RankerKind::Frequency => Ranker::frequency(),
            k => Ranker::with_lm(k, self.models.lm.as_ref().ok_or_else(|| missing("language"))?),
        };
        let candidates = ranker.complete(index, prefix, max_n)?;
        Ok(AutocompleteResponse {
            prefix: prefix.to_string(),
            ranker: kind,
            candidates,
            timings_us: BTreeMap::from([("total".to_string(), micros(start.elapsed()))]),
        })
    }

    fn tag_spans(&self, q: &str) -> Result<(Vec<String>, Vec<TagSpan>)> {
        let tagger = self.models.tagger.as_ref().ok_or_else(|| missing("tagger"))?;
        let tokens = tokenize(q);
        let spans = tagger
            .tag(q)?
            .entities()
            .into_iter()
            .map(|e| TagSpan {
                start: e.start,
                end: e.end,
                entity: e.entity.name().to_string(),
                text: tokens[e.start..e.end].join(" "),
            })
            .collect();
        Ok((tokens, spans))
    }

    pub fn tag(&self, q: &str) -> Result<TagResponse> {
        let start = Instant::now();
        let (tokens, spans) = self.tag_spans(q)?;
        Ok(TagResponse {
            query: q.to_string(),
            tokens,
            spans,
            timings_us: BTreeMap::from([("total".to_string(), micros(start.elapsed()))]),
        })
    }

    fn intent_probs(&self, q: &str) -> Result<Vec<f64>> {
        self.models.intent.as_ref().ok_or_else(|| missing("intent"))?.predict(q)
    }

    pub fn intent(&self, q: &str) -> Result<IntentResponse> {
        let start = Instant::now();
        let p = self.intent_probs(q)?;
        let top = Vertical::INTENT[crate::intent::argmax(&p)].name().to_string();
        Ok(IntentResponse {
            query: q.to_string(),
            top,
            probabilities: Vertical::INTENT.iter().map(|v| v.name().to_string()).zip(p).collect(),
            timings_us: BTreeMap::from([("total".to_string(), micros(start.elapsed()))]),
        })
    }

    fn decode_cfg(&self) -> DecodeConfig {
        DecodeConfig {
            top_k: self.cfg.suggestions,
            ..DecodeConfig::default()
        }
    }

    pub fn suggest(&self, q: &str, mode: Option<SuggestMode>) -> Result<SuggestResponse> {
        let start = Instant::now();
        let mode = mode.unwrap_or(self.cfg.suggest_mode);
        let suggestions = match mode {
            SuggestMode::Seq2Seq => {
                let m = self.models.seq2seq.as_ref().ok_or_else(|| missing("seq2seq"))?;
                m.decode(q, &self.decode_cfg())?
            }
            SuggestMode::Frequency => {
                let t = self.models.pair_table.as_ref().ok_or_else(|| missing("pair table"))?;
                t.suggest(q, self.cfg.suggestions).suggestions
            }
        };
        Ok(SuggestResponse {
            query: q.to_string(),
            mode: mode.name().to_string(),
            covered: !suggestions.is_empty(),
            suggestions,
            timings_us: BTreeMap::from([("total".to_string(), micros(start.elapsed()))]),
        })
    }

    /// Starts the suggestion branch on its own thread. `None` when the
    /// deadline is zero or no model is loaded.
    fn spawn_suggestions(&self, q: &str) -> Option<mpsc::Receiver<Result<Vec<Suggestion>>>> {
        if self.cfg.suggestion_deadline == Some(Duration::ZERO) {
            return None;
        }
        let (tx, rx) = mpsc::channel();
        let q = q.to_string();
        match self.cfg.suggest_mode {
            SuggestMode::Seq2Seq => {
                let m = Arc::clone(self.models.seq2seq.as_ref()?);
                let cfg = self.decode_cfg();
                std::thread::spawn(move || {
                    let _ = tx.send(m.decode(&q, &cfg));
                });
            }
            SuggestMode::Frequency => {
                let t = Arc::clone(self.models.pair_table.as_ref()?);
                let k = self.cfg.suggestions;
                std::thread::spawn(move || {
                    let _ = tx.send(Ok(t.suggest(&q, k).suggestions));
                });
            }
        }
        Some(rx)
    }

    fn rank(&self, strategy: Strategy, q: &str, docs: &[&DocumentRecord]) -> Result<RankedList> {
        let deep = self.models.ranker.as_ref().ok_or_else(|| missing("ranker"))?;
        match strategy {
            Strategy::Full => rank_full(deep, "", q, docs),
            Strategy::Precomputed => {
                let store = self.models.store.as_ref().ok_or_else(|| missing("embedding store"))?;
                rank_precomputed(&PrecomputedScorer::new(deep, store)?, "", q, docs)
            }
            Strategy::TwoPass => {
                let light = self.models.linear.as_ref().ok_or_else(|| missing("linear ranker"))?;
                rank_two_pass(light, deep, "", q, docs, self.cfg.k)
            }
        }
    }

    pub fn search(
        &self,
        q: &str,
        vertical: Option<Vertical>,
        size: usize,
        strategy: Option<Strategy>,
    ) -> Result<SearchResponse> {
        let start = Instant::now();
        let strategy = strategy.unwrap_or(self.cfg.strategy);
        let pending = self.spawn_suggestions(q);
        let mut timings = BTreeMap::new();

        let t = Instant::now();
        let probs = self.intent_probs(q)?;
        timings.insert("intent".to_string(), micros(t.elapsed()));

        let t = Instant::now();
        let (_, tags) = self.tag_spans(q)?;
        timings.insert("tagging".to_string(), micros(t.elapsed()));

        let t = Instant::now();
        let hits = self.index.retrieve(q, self.cfg.retrieve_limit, vertical);
        let docs = hits.iter().map(|&(id, _)| self.corpus.get(id)).collect::<Result<Vec<_>>>()?;
        timings.insert("retrieval".to_string(), micros(t.elapsed()));

        let t = Instant::now();
        let ranked = if docs.is_empty() {
            RankedList {
                query_id: String::new(),
                items: Vec::new(),
                strategy,
                deep_evals: 0,
            }
        } else {
            self.rank(strategy, q, &docs)?
        };
        let items = match vertical {
            Some(_) => ranked.items,
            None => self.blend(&probs, ranked.items),
        };
        timings.insert("ranking".to_string(), micros(t.elapsed()));

        let results = items
            .iter()
            .take(size)
            .map(|r| {
                let d = self.corpus.get(r.doc)?;
                Ok(SearchHit {
                    doc_id: d.id,
                    vertical: d.vertical.name().to_string(),
                    score: r.score,
                    fields: d.fields.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let t = Instant::now();
        let (suggestions, status) = match pending {
            None => (Vec::new(), self.idle_status()),
            Some(rx) => {
                let received = match self.cfg.suggestion_deadline {
                    None => rx.recv().map_err(|_| ()),
                    Some(d) => rx.recv_timeout(d.saturating_sub(start.elapsed())).map_err(|_| ()),
                };
                match received {
                    Ok(Ok(s)) => (s, SuggestionStatus::Ok),
                    Ok(Err(e)) => return Err(e),
                    Err(()) => (Vec::new(), SuggestionStatus::Timeout),
                }
            }
        };
        timings.insert("suggestion_wait".to_string(), micros(t.elapsed()));
        timings.insert("total".to_string(), micros(start.elapsed()));

        Ok(SearchResponse {
            search: SearchResults {
                query: q.to_string(),
                vertical: vertical.map(|v| v.name().to_string()),
                strategy,
                intent: Vertical::INTENT.iter().map(|v| v.name().to_string()).zip(probs).collect(),
                tags,
                retrieved: docs.len(),
                deep_evals: ranked.deep_evals,
                results,
            },
            suggestions,
            suggestion_status: status,
            timings_us: timings,
        })
    }

    fn idle_status(&self) -> SuggestionStatus {
        let loaded = match self.cfg.suggest_mode {
            SuggestMode::Seq2Seq => self.models.seq2seq.is_some(),
            SuggestMode::Frequency => self.models.pair_table.is_some(),
        };
        if loaded {
            SuggestionStatus::Timeout
        } else {
            SuggestionStatus::Unavailable
        }
    }

    /// Adds `w * ln p(vertical)` to each score. Help documents, which have
    /// no intent class, get the uniform prior.
    fn blend(&self, probs: &[f64], mut items: Vec<RankedDoc>) -> Vec<RankedDoc> {
        let w = self.cfg.intent_blend_weight;
        if w == 0.0 {
            return items;
        }
        let prior: HashMap<Vertical, f64> = Vertical::INTENT.iter().copied().zip(probs.iter().copied()).collect();
        for r in &mut items {
            let p = self
                .index
                .vertical(r.doc)
                .and_then(|v| prior.get(&v).copied())
                .unwrap_or(1.0 / Vertical::INTENT.len() as f64);
            r.score += w * p.max(1e-12).ln();
        }
        sort_ranked(&mut items);
        items
    }
}

/// Drops every `timings_us` member, recursively.
pub fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timings_us");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

/// Runs a recorded request stream; responses have timings removed, errors
/// become `{"error": ...}` objects.
pub fn replay(engine: &Engine, requests: &[Request]) -> Vec<Value> {
    requests
        .iter()
        .map(|r| {
            let mut v = engine
                .handle(r)
                .unwrap_or_else(|e| serde_json::json!({ "error": e.to_string() }));
            strip_timings(&mut v);
            v
        })
        .collect()
}

/// One JSON request per line; blank lines and `#` comments are skipped.
pub fn read_workload(text: &str) -> Result<Vec<Request>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format("workload", format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_workload(requests: &[Request]) -> Result<String> {
    let mut out = String::new();
    for r in requests {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
