use std::collections::BTreeMap;

/// Shared metric tokenizer: lowercase, split on anything that is not
/// alphanumeric, drop empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Relative unigram frequencies; `None` for text without tokens.
pub fn token_distribution(text: &str) -> Option<BTreeMap<String, f64>> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in &tokens {
        *counts.entry(t.clone()).or_insert(0.0) += 1.0;
    }
    let total = tokens.len() as f64;
    counts.values_mut().for_each(|c| *c /= total);
    Some(counts)
}
