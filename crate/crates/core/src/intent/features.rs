use crate::text::{EntityType, LexiconSet, TokenSequence};

/// Handcrafted feature count: seven lexicon hit counts, token count,
/// contains-digit, contains-quoted-phrase.
pub const INTENT_FEATURES: usize = 10;

pub type IntentFeatures = [f64; INTENT_FEATURES];

/// Lexicon hit counts are the number of tokens covered by greedy
/// longest-match phrases of each entity type, in [`EntityType::ALL`]
/// order.
pub fn featurize_intent(q: &TokenSequence, lex: &LexiconSet) -> IntentFeatures {
    let mut f = [0.0; INTENT_FEATURES];
    if q.tokens.is_empty() {
        return f;
    }
    for flags in lex.lexicon_match(&q.tokens) {
        for t in EntityType::ALL {
            if flags[t.index()] {
                f[t.index()] += 1.0;
            }
        }
    }
    f[7] = q.tokens.len() as f64;
    f[8] = f64::from(u8::from(q.raw.chars().any(|c| c.is_ascii_digit())));
    f[9] = f64::from(u8::from(has_quoted_phrase(&q.raw)));
    f
}

/// A pair of double quotes with something between them.
fn has_quoted_phrase(raw: &str) -> bool {
    let mut parts = raw.split('"');
    parts.next();
    match (parts.next(), parts.next()) {
        (Some(inner), Some(_)) => !inner.trim().is_empty(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Vocabulary;

    fn seq(raw: &str) -> TokenSequence {
        let v = Vocabulary::build([crate::text::tokenize("x")], 10).unwrap();
        TokenSequence::new(raw, &v)
    }

    #[test]
    fn company_tokens_counted() {
        let mut lex = LexiconSet::new();
        lex.insert(EntityType::Company, "acme corp");
        let f = featurize_intent(&seq("Acme Corp"), &lex);
        assert_eq!(f[EntityType::Company.index()], 2.0);
        assert_eq!(f[7], 2.0);
    }

    #[test]
    fn empty_query_all_zero() {
        assert_eq!(featurize_intent(&seq(""), &LexiconSet::new()), [0.0; 10]);
    }

    #[test]
    fn title_phrase_matches_greedy_oracle() {
        let mut lex = LexiconSet::new();
        lex.insert(EntityType::Title, "software engineer");
        let q = seq("software engineer jobs");
        let f = featurize_intent(&q, &lex);
        let oracle = lex
            .lexicon_match(&q.tokens)
            .iter()
            .filter(|fl| fl[EntityType::Title.index()])
            .count();
        assert_eq!(f[EntityType::Title.index()], oracle as f64);
        assert_eq!(oracle, 2);
    }

    #[test]
    fn digit_and_quote_flags() {
        let f = featurize_intent(&seq("\"data science\" 2024"), &LexiconSet::new());
        assert_eq!((f[8], f[9]), (1.0, 1.0));
        let g = featurize_intent(&seq("5\" screen"), &LexiconSet::new());
        assert_eq!((g[8], g[9]), (1.0, 0.0));
    }
}
