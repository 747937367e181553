//! Query auto-completion: candidate generation from the query log, ranked
//! by frequency or by an LSTM language model.

pub mod index;
pub mod lm;
pub mod rank;

pub use index::{Candidate, CandidateSource, CompletionIndex, Prefix, DEFAULT_MIN_SUPPORT};
pub use lm::{LanguageModel, LmConfig, StepScore};
pub use rank::{
    evaluate, impressions, CompletionEval, Impression, Ranker, RankerKind, ScoreBreakdown,
    ScoredCandidate,
};
