/// A token with its original casing kept alongside the normalized form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasedToken {
    pub raw: String,
    pub lower: String,
}

/// Splits on anything that is not alphanumeric; punctuation is dropped.
pub fn tokenize_cased(text: &str) -> Vec<CasedToken> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .filter_map(|raw| {
            let lower: String = raw
                .chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_alphanumeric())
                .collect();
            (!lower.is_empty()).then(|| CasedToken {
                raw: raw.to_string(),
                lower,
            })
        })
        .collect()
}

/// Lowercased tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_cased(text).into_iter().map(|t| t.lower).collect()
}

/// Canonical query string: lowercase tokens joined by single spaces.
pub fn normalize_query(text: &str) -> String {
    tokenize(text).join(" ")
}
