//! Content-term extraction for query formulation.

use std::collections::BTreeSet;
use std::path::Path;

use crate::tagger::PerceptronTagger;

const BUNDLED_EXCLUSIONS: &str = include_str!("../assets/exclusions_v1.txt");

const BE_FORMS: &[&str] = &["am", "is", "are", "was", "were", "be", "been", "being"];
const DO_HAVE_FORMS: &[&str] = &["do", "does", "did", "have", "has", "had"];

/// Case-insensitive set of tokens never used as query terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList(BTreeSet<String>);

impl ExclusionList {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_EXCLUSIONS)
    }

    pub fn parse(text: &str) -> Self {
        ExclusionList(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        ExclusionList(names.into_iter().map(str::to_lowercase).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(&token.to_lowercase())
    }
}

fn is_content_tag(tag: &str) -> bool {
    matches!(tag, "NN" | "NNS" | "NNP" | "NNPS") || tag.starts_with("VB")
}

/// Nouns, proper nouns and verbs of `text` in order of first occurrence,
/// minus excluded tokens. Auxiliaries are not content: forms of "be" never
/// are, and forms of "do"/"have" are not when another verb follows.
pub fn extract_content_terms(text: &str, exclusions: &ExclusionList) -> Vec<String> {
    extract_with(PerceptronTagger::bundled(), text, exclusions)
}

pub fn extract_with(
    tagger: &PerceptronTagger,
    text: &str,
    exclusions: &ExclusionList,
) -> Vec<String> {
    let tagged = tagger.tag_text(text);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, (word, tag)) in tagged.iter().enumerate() {
        if !is_content_tag(tag) || !word.chars().any(char::is_alphanumeric) {
            continue;
        }
        let lower = word.to_lowercase();
        if BE_FORMS.contains(&lower.as_str()) {
            continue;
        }
        if DO_HAVE_FORMS.contains(&lower.as_str())
            && tagged[i + 1..].iter().any(|(_, t)| t.starts_with("VB"))
        {
            continue;
        }
        if exclusions.contains(word) || !seen.insert(word.clone()) {
            continue;
        }
        out.push(word.clone());
    }
    out
}
