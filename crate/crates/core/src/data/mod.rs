//! Synthetic professional-search world: documents, query logs with clicks
//! and sessions, and the label-mining steps that turn logs into training
//! data.

pub mod datasets;
pub mod formats;
pub mod mining;
pub mod pools;
pub mod world;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

pub use datasets::{click_counts, ranking_groups, stable_hash, RankingGroup, Splits};
pub use mining::{
    derive_intent_labels, filter_generalization_pairs, is_strict_subsequence,
    mine_suggestion_pairs, SESSION_GAP_SECS,
};
pub use world::{generate_tagged_queries, generate_world, AnnotatedQuery, EntityPartition, EntitySpan, World};

/// Document verticals. The first seven are the intent classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vertical {
    People,
    Job,
    Feed,
    Company,
    Group,
    School,
    Event,
    Help,
}

impl Vertical {
    /// Intent classes in output-index order.
    pub const INTENT: [Vertical; 7] = [
        Vertical::People,
        Vertical::Job,
        Vertical::Feed,
        Vertical::Company,
        Vertical::Group,
        Vertical::School,
        Vertical::Event,
    ];

    pub const ALL: [Vertical; 8] = [
        Vertical::People,
        Vertical::Job,
        Vertical::Feed,
        Vertical::Company,
        Vertical::Group,
        Vertical::School,
        Vertical::Event,
        Vertical::Help,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Vertical::People => "people",
            Vertical::Job => "job",
            Vertical::Feed => "feed",
            Vertical::Company => "company",
            Vertical::Group => "group",
            Vertical::School => "school",
            Vertical::Event => "event",
            Vertical::Help => "help",
        }
    }

    /// Position among the seven intent classes, `None` for help.
    pub fn intent_index(self) -> Option<usize> {
        Self::INTENT.iter().position(|&v| v == self)
    }

    /// Field names documents of this vertical carry.
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            Vertical::People => &["name", "title", "company", "skills", "school", "geo"],
            Vertical::Job => &["title", "company", "geo", "skills"],
            Vertical::Company => &["name", "industry", "geo"],
            Vertical::School => &["name", "geo"],
            Vertical::Group | Vertical::Event | Vertical::Feed | Vertical::Help => &["title", "body"],
        }
    }
}

impl fmt::Display for Vertical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Vertical {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown vertical {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: u64,
    pub vertical: Vertical,
    pub fields: BTreeMap<String, String>,
}

impl DocumentRecord {
    pub fn field(&self, name: &str) -> &str {
        self.fields.get(name).map_or("", String::as_str)
    }

    /// Tokens of every field, in field-name order.
    pub fn all_tokens(&self) -> Vec<String> {
        self.fields.values().flat_map(|v| tokenize(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryLogEntry {
    pub timestamp: u64,
    pub user: u64,
    pub query: String,
    pub clicked_doc: Option<u64>,
    pub clicked_vertical: Option<Vertical>,
    /// Result doc ids in displayed rank order.
    pub shown: Vec<u64>,
    /// Whether the click was a satisfied one.
    pub satisfied: bool,
}

/// Generator settings. Every probability must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub people: usize,
    pub jobs: usize,
    pub companies: usize,
    pub schools: usize,
    pub groups: usize,
    pub events: usize,
    pub feeds: usize,
    pub help_docs: usize,
    pub users: usize,
    pub queries: usize,
    /// Probability that a help query word is replaced by a synonym.
    pub paraphrase_rate: f64,
    pub typo_rate: f64,
    pub noise_click_rate: f64,
    /// Fraction of clicks on relevant documents marked satisfied.
    pub sat_rate: f64,
    /// Probability a session continues with a reformulation.
    pub reformulation_rate: f64,
    /// Share of sessions that are help-center questions.
    pub help_share: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            people: 2500,
            jobs: 800,
            companies: 400,
            schools: 200,
            groups: 120,
            events: 120,
            feeds: 200,
            help_docs: 256,
            users: 500,
            queries: 20_000,
            paraphrase_rate: 0.5,
            typo_rate: 0.02,
            noise_click_rate: 0.02,
            sat_rate: 0.5,
            reformulation_rate: 0.6,
            help_share: 0.12,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("paraphrase_rate", self.paraphrase_rate),
            ("typo_rate", self.typo_rate),
            ("noise_click_rate", self.noise_click_rate),
            ("sat_rate", self.sat_rate),
            ("reformulation_rate", self.reformulation_rate),
            ("help_share", self.help_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.users == 0 {
            return Err(Error::invalid("users must be positive"));
        }
        let verticals = [
            self.people,
            self.jobs,
            self.companies,
            self.schools,
            self.groups,
            self.events,
            self.feeds,
        ];
        if verticals.iter().any(|&n| n == 0) {
            return Err(Error::invalid("every vertical needs at least one document"));
        }
        if self.help_share > 0.0 && self.help_docs == 0 {
            return Err(Error::invalid("help_share > 0 requires help documents"));
        }
        Ok(())
    }

    /// Zero-noise variant (no typos, no random clicks).
    pub fn noiseless(mut self) -> Self {
        self.typo_rate = 0.0;
        self.noise_click_rate = 0.0;
        self
    }
}
