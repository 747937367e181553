//! Related-query suggestions from session reformulations: a pair-frequency
//! table and a seq2seq rewriter.

pub mod pairs;
pub mod seq2seq;

pub use pairs::{PairTable, Suggestion, Suggestions};
pub use seq2seq::{BeamHypothesis, DecodeConfig, Seq2SeqConfig, Seq2SeqModel};

/// Fraction of decoded suggestions that only delete words from their source.
pub fn subsequence_rate<S: AsRef<str>>(outputs: &[(S, Vec<Suggestion>)]) -> f64 {
    let mut total = 0usize;
    let mut deletions = 0usize;
    for (src, sugg) in outputs {
        let s = crate::text::tokenize(src.as_ref());
        for x in sugg {
            total += 1;
            if crate::data::is_strict_subsequence(&crate::text::tokenize(&x.text), &s) {
                deletions += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        deletions as f64 / total as f64
    }
}

/// Fraction of queries that received at least one suggestion.
pub fn coverage(results: &[Suggestions]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.covered).count() as f64 / results.len() as f64
}
