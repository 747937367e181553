//! Sparse feature templates for the tagger.
//!
//! Token features look at the token itself, its immediate neighbours, and
//! lexicon phrases covering it. Lexicon membership counts every phrase
//! occurrence rather than a greedy tiling, so features of token `i` depend
//! only on tokens within `max(1, lexicon max length - 1)` positions.

use crate::text::{CasedToken, EntityType, LexiconSet};

/// Which feature families a mode enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Families {
    pub char: bool,
    pub word: bool,
    pub lexicon: bool,
}

/// Capitalization pattern of the raw token.
pub fn shape(raw: &str) -> &'static str {
    let letters: Vec<char> = raw.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        "none"
    } else if letters.iter().all(|c| c.is_uppercase()) {
        if letters.len() == 1 {
            "X"
        } else {
            "XX"
        }
    } else if letters.iter().all(|c| c.is_lowercase()) {
        "x"
    } else if letters[0].is_uppercase() && letters[1..].iter().all(|c| c.is_lowercase()) {
        "Xx"
    } else {
        "mixed"
    }
}

/// Per-token lexicon coverage: `covered[i][k]` when some phrase of type `k`
/// spans token `i`, `begins[i][k]` when such a phrase starts at `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconCoverage {
    pub covered: Vec<[bool; 7]>,
    pub begins: Vec<[bool; 7]>,
}

impl LexiconCoverage {
    pub fn new(tokens: &[String], lex: &LexiconSet) -> Self {
        let n = tokens.len();
        let mut c = LexiconCoverage {
            covered: vec![[false; 7]; n],
            begins: vec![[false; 7]; n],
        };
        for t in EntityType::ALL {
            let l = lex.get(t);
            for s in 0..n {
                for len in 1..=l.max_len().min(n - s) {
                    if l.contains(&tokens[s..s + len]) {
                        c.begins[s][t.index()] = true;
                        for k in s..s + len {
                            c.covered[k][t.index()] = true;
                        }
                    }
                }
            }
        }
        c
    }
}

/// Feature strings for token `i`.
pub fn token_features(
    tokens: &[CasedToken],
    cov: &LexiconCoverage,
    i: usize,
    fam: Families,
) -> Vec<String> {
    let tok = &tokens[i];
    let mut f = vec!["bias".to_string()];
    if fam.char {
        f.push(format!("shape={}", shape(&tok.raw)));
        if tok.lower.chars().any(|c| c.is_ascii_digit()) {
            f.push("digit".to_string());
        }
        let chars: Vec<char> = tok.lower.chars().collect();
        for k in 1..=3.min(chars.len()) {
            f.push(format!("p{k}={}", chars[..k].iter().collect::<String>()));
            f.push(format!("s{k}={}", chars[chars.len() - k..].iter().collect::<String>()));
        }
    }
    if fam.word {
        f.push(format!("w={}", tok.lower));
        let prev = if i == 0 { "<s>" } else { tokens[i - 1].lower.as_str() };
        let next = tokens.get(i + 1).map_or("</s>", |t| t.lower.as_str());
        f.push(format!("w-1={prev}"));
        f.push(format!("w+1={next}"));
    }
    if fam.lexicon {
        for t in EntityType::ALL {
            if cov.covered[i][t.index()] {
                f.push(format!("lex={}", t.name()));
            }
            if cov.begins[i][t.index()] {
                f.push(format!("lexb={}", t.name()));
            }
        }
    }
    f
}

/// Segment-level feature strings for `[s, e)`; token features are added
/// separately by the model.
pub fn segment_features(
    tokens: &[CasedToken],
    lower: &[String],
    lex: &LexiconSet,
    s: usize,
    e: usize,
    fam: Families,
) -> Vec<String> {
    let mut f = vec![format!("len={}", e - s)];
    if fam.lexicon {
        for t in EntityType::ALL {
            if lex.get(t).contains(&lower[s..e]) {
                f.push(format!("seglex={}", t.name()));
            }
        }
    }
    if fam.word {
        let prev = if s == 0 { "<s>" } else { tokens[s - 1].lower.as_str() };
        let next = tokens.get(e).map_or("</s>", |t| t.lower.as_str());
        f.push(format!("prev={prev}"));
        f.push(format!("next={next}"));
    }
    if fam.char {
        let shapes: Vec<&str> = tokens[s..e].iter().map(|t| shape(&t.raw)).collect();
        f.push(format!("segshape={}", shapes.join("_")));
    }
    f
}
