//! Service configuration: `key = value` lines, `#` comments.
//!
//! ```text
//! model_dir = models
//! data_dir = data
//! strategy = two-pass
//! k = 200
//! suggestion_deadline_ms = 40
//! ```
//!
//! Relative directories resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::autocomplete::RankerKind;
use crate::error::{Error, Result};
use crate::ranker::{Strategy, DEFAULT_K};
use crate::serving::index::DEFAULT_LIMIT;

/// File names inside the data and model directories.
pub mod files {
    pub const DOCUMENTS: &str = "documents.jsonl";
    pub const QUERY_LOG: &str = "querylog.tsv";
    pub const TAGGED_TRAIN: &str = "tagged_train.txt";
    pub const TAGGED_TEST: &str = "tagged_test.txt";
    pub const INTENT_LABELS: &str = "intent.tsv";
    pub const PAIRS: &str = "pairs.tsv";
    pub const QUERIES: &str = "queries.txt";

    pub const INTENT: &str = "intent.ckpt";
    pub const INTENT_BASELINE: &str = "intent-baseline.ckpt";
    pub const TAGGER: &str = "tagger.ckpt";
    pub const LM: &str = "lm.ckpt";
    pub const COMPLETION: &str = "completion";
    pub const SEQ2SEQ: &str = "seq2seq.ckpt";
    pub const PAIR_TABLE: &str = "pair_table.tsv";
    pub const RANKER: &str = "ranker.ckpt";
    pub const RANKER_LINEAR: &str = "ranker-linear.ckpt";
    pub const EMBEDDING_STORE: &str = "documents.vseb";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuggestMode {
    Seq2Seq,
    Frequency,
}

impl SuggestMode {
    pub fn name(self) -> &'static str {
        match self {
            SuggestMode::Seq2Seq => "seq2seq",
            SuggestMode::Frequency => "frequency",
        }
    }
}

impl std::str::FromStr for SuggestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq2seq" => Ok(SuggestMode::Seq2Seq),
            "frequency" => Ok(SuggestMode::Frequency),
            _ => Err(Error::invalid(format!("unknown suggestion mode {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServingConfig {
    pub model_dir: PathBuf,
    pub data_dir: PathBuf,
    pub strategy: Strategy,
    pub k: usize,
    /// `None` waits for suggestions however long they take.
    pub suggestion_deadline: Option<Duration>,
    pub suggest_mode: SuggestMode,
    pub suggestions: usize,
    pub autocomplete_ranker: RankerKind,
    pub autocomplete_max_n: usize,
    pub retrieve_limit: usize,
    pub page_size: usize,
    /// Weight of log intent probability added to blended ranking scores.
    pub intent_blend_weight: f64,
    pub host: String,
    pub port: u16,
}

impl Default for ServingConfig {
    fn default() -> Self {
        ServingConfig {
            model_dir: PathBuf::from("models"),
            data_dir: PathBuf::from("data"),
            strategy: Strategy::TwoPass,
            k: DEFAULT_K,
            suggestion_deadline: Some(Duration::from_millis(50)),
            suggest_mode: SuggestMode::Seq2Seq,
            suggestions: 5,
            autocomplete_ranker: RankerKind::Unnormalized,
            autocomplete_max_n: 10,
            retrieve_limit: DEFAULT_LIMIT,
            page_size: 10,
            intent_blend_weight: 1.0,
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value for {key}: {value:?}")))
}

impl ServingConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model_dir" => self.model_dir = PathBuf::from(value),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "strategy" => self.strategy = value.parse()?,
            "k" => {
                self.k = parse(key, value)?;
                if self.k == 0 {
                    return Err(Error::invalid("k must be at least 1"));
                }
            }
            "suggestion_deadline_ms" => {
                self.suggestion_deadline = match value {
                    "none" | "inf" => None,
                    v => Some(Duration::from_millis(parse(key, v)?)),
                }
            }
            "suggest_mode" => self.suggest_mode = value.parse()?,
            "suggestions" => self.suggestions = parse(key, value)?,
            "autocomplete_ranker" => self.autocomplete_ranker = value.parse()?,
            "autocomplete_max_n" => self.autocomplete_max_n = parse(key, value)?,
            "retrieve_limit" => self.retrieve_limit = parse(key, value)?,
            "page_size" => self.page_size = parse(key, value)?,
            "intent_blend_weight" => self.intent_blend_weight = parse(key, value)?,
            "host" => self.host = value.to_string(),
            "port" => self.port = parse(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key {key}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ServingConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("config", format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut cfg.model_dir, &mut cfg.data_dir] {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    /// Sorted `key=value` pairs that parse back to this config.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let deadline = self
            .suggestion_deadline
            .map_or("none".to_string(), |d| d.as_millis().to_string());
        [
            ("model_dir", self.model_dir.display().to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("strategy", self.strategy.name().to_string()),
            ("k", self.k.to_string()),
            ("suggestion_deadline_ms", deadline),
            ("suggest_mode", self.suggest_mode.name().to_string()),
            ("suggestions", self.suggestions.to_string()),
            ("autocomplete_ranker", self.autocomplete_ranker.name().to_string()),
            ("autocomplete_max_n", self.autocomplete_max_n.to_string()),
            ("retrieve_limit", self.retrieve_limit.to_string()),
            ("page_size", self.page_size.to_string()),
            ("intent_blend_weight", self.intent_blend_weight.to_string()),
            ("host", self.host.clone()),
            ("port", self.port.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ServingConfig::parse(
            "# service\nstrategy = full\nk=50  # top\nsuggestion_deadline_ms = none\nautocomplete_ranker = normalized\n",
        )
        .unwrap();
        assert_eq!(cfg.strategy, Strategy::Full);
        assert_eq!(cfg.k, 50);
        assert_eq!(cfg.suggestion_deadline, None);
        assert_eq!(cfg.autocomplete_ranker, RankerKind::Normalized);
        assert_eq!(ServingConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ServingConfig::parse("colour = blue").is_err());
        assert!(ServingConfig::parse("k = many").is_err());
        assert!(ServingConfig::parse("k = 0").is_err());
        assert!(ServingConfig::parse("just words").is_err());
    }
}
