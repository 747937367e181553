//! Offline pipeline behind the command line: generate a world, mine labeled
//! splits from it, train each task's models and evaluate them.
//!
//! Every step reads and writes fixed file names (see
//! [`crate::serving::config::files`]) so the steps chain through two
//! directories, one for data and one for models.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::autocomplete::{impressions, CompletionIndex, LanguageModel, LmConfig, Ranker, RankerKind, DEFAULT_MIN_SUPPORT};
use crate::data::formats::{
    read_annotated, read_documents, read_file, read_intent_labels, read_log, read_pairs, write_annotated,
    write_documents, write_intent_labels, write_log, write_pairs,
};
use crate::data::{
    click_counts, derive_intent_labels, filter_generalization_pairs, generate_tagged_queries, generate_world, mine_suggestion_pairs,
    ranking_groups, DocumentRecord, EntityPartition, GeneratorConfig, QueryLogEntry, Splits, Vertical,
};
use crate::error::{Error, Result};
use crate::evalbench::{eval_autocomplete, eval_intent, eval_ranker, eval_suggest, eval_tagger, EvalReport, Task};
use crate::intent::{IntentBaseline, IntentClassifier, IntentConfig, IntentModel};
use crate::ranker::{prepare_eval_groups, prepare_groups, Corpus, EmbeddingStore, LinearRanker, RankerConfig, RankerModel};
use crate::serving::config::files;
use crate::serving::Request;
use crate::suggest::{DecodeConfig, PairTable, Seq2SeqConfig, Seq2SeqModel};
use crate::tagger::{Tagger, TaggerConfig};
use crate::text::{normalize_query, tokenize, LexiconSet};

pub const LEXICON_DIR: &str = "lexicons";

/// `querylog.tsv` becomes `querylog.test.tsv`.
pub fn split_file(name: &str, part: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}.{part}.{ext}"),
        None => format!("{name}.{part}"),
    }
}

/// Key/value settings from a config file and command-line overrides. Every
/// value read through [`Settings::get`] is remembered, defaults included,
/// so a run can record exactly what it used.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            s.set(line).map_err(|e| Error::Format {
                what: "settings",
                detail: format!("line {}: {e}", n + 1),
            })?;
        }
        Ok(s)
    }

    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got {assignment:?}")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::invalid("empty settings key"));
        }
        self.values.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn raw(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.values.get(key) {
            Some(v) => v.parse().map_err(|e| Error::invalid(format!("{key}: {e}")))?,
            None => default,
        };
        self.resolved.borrow_mut().insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    /// Keys that were given but never read.
    pub fn unused(&self) -> Vec<String> {
        let r = self.resolved.borrow();
        self.values.keys().filter(|k| !r.contains_key(*k)).cloned().collect()
    }
}

pub fn generator_config(s: &Settings, seed: u64) -> Result<GeneratorConfig> {
    let d = GeneratorConfig::default();
    let cfg = GeneratorConfig {
        seed,
        people: s.get("gen.people", d.people)?,
        jobs: s.get("gen.jobs", d.jobs)?,
        companies: s.get("gen.companies", d.companies)?,
        schools: s.get("gen.schools", d.schools)?,
        groups: s.get("gen.groups", d.groups)?,
        events: s.get("gen.events", d.events)?,
        feeds: s.get("gen.feeds", d.feeds)?,
        help_docs: s.get("gen.help_docs", d.help_docs)?,
        users: s.get("gen.users", d.users)?,
        queries: s.get("gen.queries", d.queries)?,
        paraphrase_rate: s.get("gen.paraphrase_rate", d.paraphrase_rate)?,
        typo_rate: s.get("gen.typo_rate", d.typo_rate)?,
        noise_click_rate: s.get("gen.noise_click_rate", d.noise_click_rate)?,
        sat_rate: s.get("gen.sat_rate", d.sat_rate)?,
        reformulation_rate: s.get("gen.reformulation_rate", d.reformulation_rate)?,
        help_share: s.get("gen.help_share", d.help_share)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Writes documents, the query log, lexicons and the tagged query sets.
pub fn generate(out: &Path, s: &Settings, seed: u64) -> Result<Vec<PathBuf>> {
    let cfg = generator_config(s, seed)?;
    let n_train = s.get("gen.tagged_train", 2000usize)?;
    let n_test = s.get("gen.tagged_test", 500usize)?;
    let world = generate_world(&cfg)?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    write(out, files::DOCUMENTS, &write_documents(&world.docs)?, &mut written)?;
    write(out, files::QUERY_LOG, &write_log(&world.log), &mut written)?;
    let tagged_train = generate_tagged_queries(n_train, seed, EntityPartition::Train);
    let tagged_test = generate_tagged_queries(n_test, seed.wrapping_add(1), EntityPartition::Test);
    write(out, files::TAGGED_TRAIN, &write_annotated(&tagged_train), &mut written)?;
    write(out, files::TAGGED_TEST, &write_annotated(&tagged_test), &mut written)?;
    let lex = out.join(LEXICON_DIR);
    world.lexicons.save_dir(&lex)?;
    written.push(lex);
    Ok(written)
}

fn split_fracs(s: &Settings) -> Result<(f64, f64)> {
    let valid = s.get("split.valid", 0.1)?;
    let test = s.get("split.test", 0.2)?;
    if !(valid >= 0.0 && test >= 0.0 && valid + test < 1.0) {
        return Err(Error::invalid("split fractions must be non-negative and sum below 1"));
    }
    Ok((valid, test))
}

/// Log entries split by normalized query text, so a query string never
/// appears in two splits.
pub fn split_log(log: Vec<QueryLogEntry>, valid: f64, test: f64, seed: u64) -> Splits<QueryLogEntry> {
    Splits::by_key(log, |e| normalize_query(&e.query), valid, test, seed)
}

/// Pairs split by source query; held-out sources are unseen in training.
pub fn split_pairs(pairs: Vec<(String, String)>, valid: f64, test: f64, seed: u64) -> Splits<(String, String)> {
    Splits::by_key(pairs, |p| p.0.clone(), valid, test, seed)
}

/// Query strings in log order, cut by time: the earliest go to train and
/// the latest to test. Used for completion, where popular queries recur.
pub fn split_stream(log: &[QueryLogEntry], valid: f64, test: f64) -> Splits<String> {
    let mut entries: Vec<&QueryLogEntry> = log.iter().filter(|e| !normalize_query(&e.query).is_empty()).collect();
    entries.sort_by_key(|e| (e.timestamp, e.user));
    let n = entries.len();
    let n_test = (n as f64 * test).round() as usize;
    let n_valid = (n as f64 * valid).round() as usize;
    let cut_valid = n - n_test - n_valid;
    let mut queries = entries.into_iter().map(|e| e.query.replace(['\n', '\r'], " "));
    Splits {
        train: queries.by_ref().take(cut_valid).collect(),
        valid: queries.by_ref().take(n_valid).collect(),
        test: queries.collect(),
    }
}

/// Splits the query log and derives intent labels and suggestion pairs,
/// writing `<name>.{train,valid,test}.<ext>` for each.
pub fn mine(data: &Path, s: &Settings, seed: u64) -> Result<Vec<PathBuf>> {
    let (valid, test) = split_fracs(s)?;
    let log = read_log(&read_file(&data.join(files::QUERY_LOG))?)?;
    let mut written = Vec::new();

    let pairs = mine_suggestion_pairs(&log);
    write(data, files::PAIRS, &write_pairs(&pairs), &mut written)?;
    let pair_splits = split_pairs(pairs, valid, test, seed);
    let stream = split_stream(&log, valid, test);
    let log_splits = split_log(log, valid, test, seed);
    for (part, entries, pairs, queries) in [
        ("train", &log_splits.train, &pair_splits.train, &stream.train),
        ("valid", &log_splits.valid, &pair_splits.valid, &stream.valid),
        ("test", &log_splits.test, &pair_splits.test, &stream.test),
    ] {
        write(data, &split_file(files::QUERIES, part), &write_lines(queries), &mut written)?;
        write(data, &split_file(files::QUERY_LOG, part), &write_log(entries), &mut written)?;
        let labels = derive_intent_labels(entries);
        write(data, &split_file(files::INTENT_LABELS, part), &write_intent_labels(&labels), &mut written)?;
        write(data, &split_file(files::PAIRS, part), &write_pairs(pairs), &mut written)?;
    }
    Ok(written)
}

pub fn intent_config(s: &Settings, seed: u64) -> Result<IntentConfig> {
    let d = IntentConfig::default();
    Ok(IntentConfig {
        encoder: s.get("intent.encoder", d.encoder)?,
        embedding_dim: s.get("intent.embedding_dim", d.embedding_dim)?,
        filters: s.get("intent.filters", d.filters)?,
        width: s.get("intent.width", d.width)?,
        lstm_hidden: s.get("intent.lstm_hidden", d.lstm_hidden)?,
        hidden: s.get("intent.hidden", d.hidden)?,
        max_vocab: s.get("intent.max_vocab", d.max_vocab)?,
        epochs: s.get("intent.epochs", d.epochs)?,
        batch_size: s.get("intent.batch_size", d.batch_size)?,
        learning_rate: s.get("intent.learning_rate", d.learning_rate)?,
        seed,
    })
}

pub fn tagger_config(s: &Settings, seed: u64) -> Result<TaggerConfig> {
    let d = TaggerConfig::default();
    Ok(TaggerConfig {
        mode: s.get("tagger.mode", d.mode)?,
        max_segment: s.get("tagger.max_segment", d.max_segment)?,
        epochs: s.get("tagger.epochs", d.epochs)?,
        batch_size: s.get("tagger.batch_size", d.batch_size)?,
        learning_rate: s.get("tagger.learning_rate", d.learning_rate)?,
        l2: s.get("tagger.l2", d.l2)?,
        embedding_dim: s.get("tagger.embedding_dim", d.embedding_dim)?,
        hidden: s.get("tagger.hidden", d.hidden)?,
        constrain_bio: s.get("tagger.constrain_bio", d.constrain_bio)?,
        seed,
    })
}

pub fn lm_config(s: &Settings, seed: u64) -> Result<LmConfig> {
    let d = LmConfig::default();
    Ok(LmConfig {
        embedding_dim: s.get("lm.embedding_dim", d.embedding_dim)?,
        hidden: s.get("lm.hidden", d.hidden)?,
        max_vocab: s.get("lm.max_vocab", d.max_vocab)?,
        alpha: s.get("lm.alpha", d.alpha)?,
        epochs: s.get("lm.epochs", d.epochs)?,
        batch_size: s.get("lm.batch_size", d.batch_size)?,
        learning_rate: s.get("lm.learning_rate", d.learning_rate)?,
        seed,
    })
}

pub fn seq2seq_config(s: &Settings, seed: u64) -> Result<Seq2SeqConfig> {
    let d = Seq2SeqConfig::default();
    Ok(Seq2SeqConfig {
        embedding_dim: s.get("seq2seq.embedding_dim", d.embedding_dim)?,
        hidden: s.get("seq2seq.hidden", d.hidden)?,
        layers: s.get("seq2seq.layers", d.layers)?,
        max_vocab: s.get("seq2seq.max_vocab", d.max_vocab)?,
        epochs: s.get("seq2seq.epochs", d.epochs)?,
        batch_size: s.get("seq2seq.batch_size", d.batch_size)?,
        learning_rate: s.get("seq2seq.learning_rate", d.learning_rate)?,
        seed,
        allow_generalization_pairs: s.get("seq2seq.allow_generalization_pairs", d.allow_generalization_pairs)?,
    })
}

pub fn ranker_config(s: &Settings, seed: u64) -> Result<RankerConfig> {
    let d = RankerConfig::default();
    Ok(RankerConfig {
        embedding_dim: s.get("ranker.embedding_dim", d.embedding_dim)?,
        filters: s.get("ranker.filters", d.filters)?,
        width: s.get("ranker.width", d.width)?,
        hidden: s.get("ranker.hidden", d.hidden)?,
        max_vocab: s.get("ranker.max_vocab", d.max_vocab)?,
        epochs: s.get("ranker.epochs", d.epochs)?,
        batch_size: s.get("ranker.batch_size", d.batch_size)?,
        learning_rate: s.get("ranker.learning_rate", d.learning_rate)?,
        seed,
    })
}

fn decode_config(s: &Settings) -> Result<DecodeConfig> {
    let d = DecodeConfig::default();
    Ok(DecodeConfig {
        beam: s.get("decode.beam", d.beam)?,
        max_len: s.get("decode.max_len", d.max_len)?,
        length_norm: s.get("decode.length_norm", d.length_norm)?,
        exclude_source: s.get("decode.exclude_source", d.exclude_source)?,
        top_k: s.get("decode.top_k", d.top_k)?,
    })
}

/// Every field name any vertical uses, in first-seen order. The serving
/// ranker scores documents of all verticals in one feature space.
pub fn union_fields() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for v in Vertical::ALL {
        for f in v.field_names() {
            if !out.contains(f) {
                out.push(f);
            }
        }
    }
    out
}

fn load_docs(data: &Path) -> Result<Vec<DocumentRecord>> {
    read_documents(&read_file(&data.join(files::DOCUMENTS))?)
}

fn write_lines(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

fn read_lines(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

fn load_log(data: &Path, part: &str) -> Result<Vec<QueryLogEntry>> {
    read_log(&read_file(&data.join(split_file(files::QUERY_LOG, part)))?)
}

/// Trains the models of `task` from `data` into `out`.
pub fn train(task: Task, data: &Path, out: &Path, s: &Settings, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut save = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = out.join(name);
        f(&path)?;
        log::info!("wrote {}", path.display());
        written.push(path);
        Ok(())
    };
    match task {
        Task::Intent => {
            let cfg = intent_config(s, seed)?;
            let lexicons = LexiconSet::load_dir(&data.join(LEXICON_DIR))?;
            let labels = read_intent_labels(&read_file(&data.join(split_file(files::INTENT_LABELS, "train")))?)?;
            let model = IntentModel::train(&labels, &lexicons, &cfg)?;
            save(files::INTENT, &|p| model.save(p).map(drop))?;
            let baseline = IntentBaseline::train(&labels, &lexicons, &cfg)?;
            save(files::INTENT_BASELINE, &|p| baseline.save(p).map(drop))?;
        }
        Task::Tagger => {
            let cfg = tagger_config(s, seed)?;
            let lexicons = LexiconSet::load_dir(&data.join(LEXICON_DIR))?;
            let tagged = read_annotated(&read_file(&data.join(files::TAGGED_TRAIN))?)?;
            let model = Tagger::train(&tagged, &lexicons, &cfg)?;
            save(files::TAGGER, &|p| model.save(p).map(drop))?;
        }
        Task::Autocomplete => {
            let cfg = lm_config(s, seed)?;
            let min_support = s.get("autocomplete.min_support", DEFAULT_MIN_SUPPORT)?;
            let queries = read_lines(&read_file(&data.join(split_file(files::QUERIES, "train")))?);
            let index = CompletionIndex::build(&queries, min_support);
            save(files::COMPLETION, &|p| index.save_dir(p))?;
            let corpus: Vec<Vec<String>> = queries.iter().map(|q| tokenize(q)).filter(|t| !t.is_empty()).collect();
            let lm = LanguageModel::train(&corpus, &cfg)?;
            save(files::LM, &|p| lm.save(p).map(drop))?;
        }
        Task::Suggest => {
            let cfg = seq2seq_config(s, seed)?;
            let pairs = read_pairs(&read_file(&data.join(split_file(files::PAIRS, "train")))?)?;
            let table = PairTable::build(&pairs);
            save(files::PAIR_TABLE, &|p| table.save(p))?;
            let pairs = if cfg.allow_generalization_pairs {
                pairs
            } else {
                filter_generalization_pairs(&pairs)
            };
            let model = Seq2SeqModel::train(&pairs, &cfg)?;
            save(files::SEQ2SEQ, &|p| model.save(p).map(drop))?;
        }
        Task::Ranker => {
            let cfg = ranker_config(s, seed)?;
            let docs = load_docs(data)?;
            let train_log = load_log(data, "train")?;
            let valid_log = load_log(data, "valid")?;
            let corpus = Corpus::new(docs);
            let (fx, groups) = prepare_groups(&ranking_groups(&train_log), &corpus, &union_fields(), click_counts(&train_log))?;
            let valid = prepare_eval_groups(&ranking_groups(&valid_log), &corpus, &fx)?;
            let linear = LinearRanker::train(&groups, &valid, fx.clone(), &cfg)?;
            save(files::RANKER_LINEAR, &|p| linear.save(p).map(drop))?;
            let deep = RankerModel::train(&groups, &valid, &corpus, fx, &cfg)?;
            save(files::RANKER, &|p| deep.save(p).map(drop))?;
            let store = EmbeddingStore::build(&deep, corpus.iter())?;
            save(files::EMBEDDING_STORE, &|p| store.save(p))?;
        }
    }
    Ok(written)
}

/// Default held-out file for a task.
pub fn default_split(task: Task, data: &Path) -> PathBuf {
    data.join(match task {
        Task::Intent => split_file(files::INTENT_LABELS, "test"),
        Task::Tagger => files::TAGGED_TEST.to_string(),
        Task::Autocomplete => split_file(files::QUERIES, "test"),
        Task::Ranker => split_file(files::QUERY_LOG, "test"),
        Task::Suggest => split_file(files::PAIRS, "test"),
    })
}

fn prefixed(into: &mut EvalReport, prefix: &str, from: EvalReport) {
    for (k, v) in from.metrics {
        into.metrics.insert(format!("{prefix}.{k}"), v);
    }
}

/// Evaluates the models of `task` in `models` on `split`. Ranker evaluation
/// also needs the documents in `data`.
pub fn evaluate(task: Task, split: &Path, data: &Path, models: &Path, s: &Settings, seed: u64) -> Result<EvalReport> {
    let text = read_file(split)?;
    let train_size = |name: &str| -> Option<usize> {
        let p = data.join(name);
        let text = std::fs::read_to_string(p).ok()?;
        Some(text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count())
    };
    let (mut report, train_file) = match task {
        Task::Intent => {
            let data_rows = read_intent_labels(&text)?;
            let model = IntentModel::load(&models.join(files::INTENT))?;
            crate::evalbench::check_vocabulary(model.vocab(), &data_rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>())?;
            let mut r = eval_intent(&data_rows, |q| model.predict_vertical(q))?;
            let base_path = models.join(files::INTENT_BASELINE);
            if base_path.exists() {
                let base = IntentBaseline::load(&base_path)?;
                prefixed(&mut r, "baseline", eval_intent(&data_rows, |q| base.predict_vertical(q))?);
            }
            (r, Some(split_file(files::INTENT_LABELS, "train")))
        }
        Task::Tagger => {
            let tagged = read_annotated(&text)?;
            let model = Tagger::load(&models.join(files::TAGGER))?;
            (eval_tagger(&tagged, |q| model.tag(q))?, Some(files::TAGGED_TRAIN.to_string()))
        }
        Task::Autocomplete => {
            let max_n = s.get("autocomplete.max_n", 10usize)?;
            let queries = read_lines(&text);
            let imps = impressions(&queries, seed);
            let index = CompletionIndex::load_dir(&models.join(files::COMPLETION))?;
            let lm_path = models.join(files::LM);
            let lm = if lm_path.exists() { Some(LanguageModel::load(&lm_path)?) } else { None };
            let run = |ranker: Ranker<'_>| {
                eval_autocomplete(&imps, |p| Ok(ranker.complete(&index, p, max_n)?.into_iter().map(|c| c.text).collect()))
            };
            let mut r = run(Ranker::frequency())?;
            let freq = r.clone();
            r.metrics.clear();
            prefixed(&mut r, RankerKind::Frequency.name(), freq);
            if let Some(lm) = &lm {
                for kind in [RankerKind::Normalized, RankerKind::Unnormalized] {
                    prefixed(&mut r, kind.name(), run(Ranker::with_lm(kind, lm))?);
                }
            }
            (r, Some(split_file(files::QUERIES, "train")))
        }
        Task::Suggest => {
            let k = s.get("suggest.k", 5usize)?;
            let decode = decode_config(s)?;
            let mut seen = BTreeSet::new();
            let rows: Vec<(String, Option<String>)> = read_pairs(&text)?
                .into_iter()
                .filter(|p| seen.insert(p.clone()))
                .map(|(a, b)| (a, Some(b)))
                .collect();
            let model = Seq2SeqModel::load(&models.join(files::SEQ2SEQ))?;
            let mut r = eval_suggest(&rows, |q| {
                let mut out = model.decode(q, &decode)?;
                out.truncate(k);
                Ok(out)
            })?;
            let table_path = models.join(files::PAIR_TABLE);
            if table_path.exists() {
                let table = PairTable::load(&table_path)?;
                prefixed(&mut r, "frequency", eval_suggest(&rows, |q| Ok(table.suggest(q, k).suggestions))?);
            }
            (r, Some(split_file(files::PAIRS, "train")))
        }
        Task::Ranker => {
            let corpus = Corpus::new(load_docs(data)?);
            let groups = ranking_groups(&read_log(&text)?);
            let deep = RankerModel::load(&models.join(files::RANKER))?;
            let mut r = eval_ranker(&groups, |q, d| deep.score_full(q, corpus.get(d)?))?;
            let linear_path = models.join(files::RANKER_LINEAR);
            if linear_path.exists() {
                let linear = LinearRanker::load(&linear_path)?;
                prefixed(&mut r, "linear", eval_ranker(&groups, |q, d| Ok(linear.score(q, corpus.get(d)?)))?);
            }
            (r, Some(split_file(files::QUERY_LOG, "train")))
        }
    };
    if let Some(n) = train_file.as_deref().and_then(train_size) {
        report.split_sizes.insert("train".into(), n);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    /// Every prefix of each query, as typed.
    Keystrokes,
    Search,
}

impl FromStr for WorkloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keystrokes" => Ok(WorkloadKind::Keystrokes),
            "search" => Ok(WorkloadKind::Search),
            _ => Err(Error::invalid(format!("unknown workload kind {s}"))),
        }
    }
}

/// Requests built from the first `n` distinct test-split queries, in log
/// order.
pub fn build_workload(data: &Path, kind: WorkloadKind, n: usize) -> Result<Vec<Request>> {
    let mut seen = BTreeSet::new();
    let queries: Vec<String> = load_log(data, "test")?
        .into_iter()
        .map(|e| normalize_query(&e.query))
        .filter(|q| !q.is_empty() && seen.insert(q.clone()))
        .take(n)
        .collect();
    let mut out = Vec::new();
    for q in queries {
        match kind {
            WorkloadKind::Keystrokes => {
                let ends = q.char_indices().map(|(i, _)| i).skip(1).chain([q.len()]);
                for end in ends {
                    out.push(Request::Autocomplete {
                        prefix: q[..end].to_string(),
                        n: None,
                        ranker: None,
                    });
                }
            }
            WorkloadKind::Search => out.push(Request::Search {
                q,
                vertical: None,
                size: None,
                strategy: None,
            }),
        }
    }
    Ok(out)
}

/// Hex SHA-256 of every file under `path`, keyed by path relative to `root`.
pub fn file_hashes(root: &Path, path: &Path) -> Result<BTreeMap<String, String>> {
    use sha2::{Digest, Sha256};
    let mut out = BTreeMap::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(p) = stack.pop() {
        if p.is_dir() {
            for entry in std::fs::read_dir(&p)? {
                stack.push(entry?.path());
            }
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&p)?)));
        }
    }
    Ok(out)
}

/// Sorted `key=value` lines.
pub fn manifest_text(entries: &BTreeMap<String, String>) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_manifest(text: &str) -> Result<HashMap<String, String>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format {
                    what: "manifest",
                    detail: format!("line without '=': {l}"),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_file_names() {
        assert_eq!(split_file("querylog.tsv", "test"), "querylog.test.tsv");
        assert_eq!(split_file("pairs", "train"), "pairs.train");
    }

    #[test]
    fn settings_record_defaults_and_overrides() {
        let mut s = Settings::parse("# comment\nintent.epochs = 2\n\nunused.key=1\n").unwrap();
        s.set("intent.learning_rate=0.5").unwrap();
        let cfg = intent_config(&s, 9).unwrap();
        assert_eq!((cfg.epochs, cfg.learning_rate, cfg.seed), (2, 0.5, 9));
        let r = s.resolved();
        assert_eq!(r["intent.epochs"], "2");
        assert_eq!(r["intent.hidden"], IntentConfig::default().hidden.to_string());
        assert_eq!(s.unused(), vec!["unused.key".to_string()]);
        assert!(Settings::parse("no equals sign").is_err());
        assert!(intent_config(&Settings::parse("intent.epochs=many").unwrap(), 1).is_err());
    }

    #[test]
    fn union_fields_cover_every_vertical() {
        let u = union_fields();
        for v in Vertical::ALL {
            assert!(v.field_names().iter().all(|f| u.contains(f)));
        }
        let set: BTreeSet<_> = u.iter().collect();
        assert_eq!(set.len(), u.len());
    }

    #[test]
    fn manifest_round_trip() {
        let m = BTreeMap::from([("b".to_string(), "2".to_string()), ("a".to_string(), "x=y".to_string())]);
        let text = manifest_text(&m);
        assert_eq!(text, "a=x=y\nb=2\n");
        let back = parse_manifest(&text).unwrap();
        assert_eq!(back["a"], "x=y");
    }
}
