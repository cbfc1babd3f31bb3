use std::collections::BTreeSet;

use crate::embed::ProviderKind;
use crate::evaluation::tokenize;
use crate::provider::ProviderError;

use super::{NliProbs, NliProvider};

const NEGATIONS: &[&str] = &[
    "no", "not", "never", "without", "none", "neither", "nor", "cannot",
];

const ANTONYMS: &[(&str, &str)] = &[
    ("increase", "decrease"),
    ("increased", "decreased"),
    ("increases", "decreases"),
    ("higher", "lower"),
    ("improved", "worsened"),
    ("effective", "ineffective"),
    ("safe", "unsafe"),
    ("beneficial", "harmful"),
    ("reduced", "elevated"),
];

/// Rule-based stand-in for an NLI model: lexical overlap scaled by a
/// negation or antonym mismatch. Deterministic, for offline fixtures and
/// benches only.
#[derive(Debug, Clone)]
pub struct LexicalNli {
    model_tag: String,
}

impl LexicalNli {
    pub fn new(model_tag: impl Into<String>) -> Self {
        LexicalNli {
            model_tag: model_tag.into(),
        }
    }

    pub fn score(premise: &str, hypothesis: &str) -> NliProbs {
        let p: BTreeSet<String> = tokenize(premise).into_iter().collect();
        let h: BTreeSet<String> = tokenize(hypothesis).into_iter().collect();
        let union = p.union(&h).count();
        let overlap = if union == 0 {
            0.0
        } else {
            p.intersection(&h).count() as f64 / union as f64
        };
        let negated = |s: &BTreeSet<String>| NEGATIONS.iter().any(|n| s.contains(*n));
        let antonym = ANTONYMS
            .iter()
            .any(|(x, y)| (p.contains(*x) && h.contains(*y)) || (p.contains(*y) && h.contains(*x)));
        let conflict = negated(&p) != negated(&h) || antonym;
        let con = if conflict {
            0.05 + 0.9 * overlap
        } else {
            0.05 * (1.0 - overlap)
        };
        let ent = if conflict { 0.0 } else { 0.9 * overlap };
        NliProbs {
            ent,
            neu: 1.0 - con - ent,
            con,
        }
    }
}

impl NliProvider for LexicalNli {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileBacked
    }

    fn model_tag(&self) -> &str {
        &self.model_tag
    }

    fn classify(&self, pairs: &[(&str, &str)]) -> Result<Vec<NliProbs>, ProviderError> {
        Ok(pairs.iter().map(|(p, h)| Self::score(p, h)).collect())
    }
}
