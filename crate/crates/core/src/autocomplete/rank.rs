use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::autocomplete::index::{Candidate, CandidateSource, CompletionIndex};
use crate::autocomplete::lm::LanguageModel;
use crate::error::{Error, Result};
use crate::evalbench::metrics::{mrr_at_10, reciprocal_rank};
use crate::nn::seeded_rng;
use crate::text::{normalize_query, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerKind {
    Frequency,
    Normalized,
    Unnormalized,
}

impl RankerKind {
    pub const ALL: [RankerKind; 3] = [RankerKind::Frequency, RankerKind::Normalized, RankerKind::Unnormalized];

    pub fn name(self) -> &'static str {
        match self {
            RankerKind::Frequency => "frequency",
            RankerKind::Normalized => "normalized",
            RankerKind::Unnormalized => "unnormalized",
        }
    }
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown ranker {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    /// `ln(1 + count)` for logged queries; synthetic candidates map into
    /// `(-1, 0)` by the support of their generating unit, so they sort below
    /// every logged query.
    pub frequency: f64,
    pub lm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub text: String,
    pub source: CandidateSource,
    pub score: f64,
    pub breakdown: ScoreBreakdown,
}

/// Ranks generated candidates. LM rankers add `blend · frequency` to the
/// language-model score; the default blend of zero ranks by the LM alone.
#[derive(Debug, Clone, Copy)]
pub struct Ranker<'a> {
    pub kind: RankerKind,
    pub lm: Option<&'a LanguageModel>,
    pub blend: f64,
}

impl<'a> Ranker<'a> {
    pub fn frequency() -> Self {
        Ranker {
            kind: RankerKind::Frequency,
            lm: None,
            blend: 0.0,
        }
    }

    pub fn with_lm(kind: RankerKind, lm: &'a LanguageModel) -> Self {
        Ranker {
            kind,
            lm: Some(lm),
            blend: 0.0,
        }
    }

    pub fn score(&self, cand: &Candidate) -> Result<ScoredCandidate> {
        let frequency = match cand.source {
            CandidateSource::FullQuery => (cand.support as f64).ln_1p(),
            CandidateSource::Synthetic => -1.0 / (1.0 + cand.support as f64),
        };
        let lm = match self.kind {
            RankerKind::Frequency => None,
            kind => {
                let lm = self
                    .lm
                    .ok_or_else(|| Error::invalid(format!("{kind} ranker needs a language model")))?;
                let toks = tokenize(&cand.text);
                Some(if kind == RankerKind::Normalized {
                    lm.score_normalized(&toks)?
                } else {
                    lm.score_unnormalized(&toks)?
                })
            }
        };
        let score = match lm {
            None => frequency,
            Some(s) => s + self.blend * frequency,
        };
        Ok(ScoredCandidate {
            text: cand.text.clone(),
            source: cand.source,
            score,
            breakdown: ScoreBreakdown { frequency, lm },
        })
    }

    /// Descending score, ties by candidate text.
    pub fn rank(&self, candidates: &[Candidate]) -> Result<Vec<ScoredCandidate>> {
        let mut out = candidates.iter().map(|c| self.score(c)).collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.text.cmp(&b.text))
        });
        Ok(out)
    }

    pub fn complete(&self, index: &CompletionIndex, prefix: &str, max_n: usize) -> Result<Vec<ScoredCandidate>> {
        self.rank(&index.candidates(prefix, max_n))
    }
}

/// A typed prefix and the query the user eventually submitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Impression {
    pub prefix: String,
    pub submitted: String,
}

/// One impression per query, cut at a random character position that
/// leaves at least one character typed and at least one to complete.
pub fn impressions<S: AsRef<str>>(queries: &[S], seed: u64) -> Vec<Impression> {
    let mut rng = seeded_rng(seed);
    queries
        .iter()
        .filter_map(|q| {
            let submitted = normalize_query(q.as_ref());
            let chars: Vec<char> = submitted.chars().collect();
            if chars.len() < 2 {
                return None;
            }
            let cut = rng.random_range(1..chars.len());
            Some(Impression {
                prefix: chars[..cut].iter().collect(),
                submitted,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionEval {
    pub ranker: RankerKind,
    pub mrr_at_10: f64,
    pub impressions: usize,
    /// Impressions whose submitted query was among the candidates at all.
    pub recall: f64,
}

pub fn evaluate(ranker: &Ranker<'_>, index: &CompletionIndex, imps: &[Impression], max_n: usize) -> Result<CompletionEval> {
    let mut rr = Vec::with_capacity(imps.len());
    let mut found = 0usize;
    for imp in imps {
        let cands = index.candidates(&imp.prefix, max_n);
        if cands.iter().any(|c| c.text == imp.submitted) {
            found += 1;
        }
        let ranked = ranker.rank(&cands)?;
        let texts: Vec<&str> = ranked.iter().map(|c| c.text.as_str()).collect();
        rr.push(reciprocal_rank(&texts, &imp.submitted));
    }
    Ok(CompletionEval {
        ranker: ranker.kind,
        mrr_at_10: mrr_at_10(&rr),
        impressions: imps.len(),
        recall: if imps.is_empty() { 0.0 } else { found as f64 / imps.len() as f64 },
    })
}
