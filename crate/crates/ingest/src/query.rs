//! Three-tier PubMed query formulation.

use serde::{Deserialize, Serialize};

/// Proximity window, in tokens, for tiers two and three.
pub const PROXIMITY: u32 = 25;
/// Language filter appended to every expression.
pub const LANGUAGE_FILTER: &str = "english[la]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    /// Every term as an exact phrase in title/abstract.
    ExactSentence,
    /// All terms within the proximity window, medicine name in the title.
    ProximityTerms,
    /// The whole question within the proximity window.
    ProximityFull,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFormulation {
    pub tier: Tier,
    pub expression: String,
    pub source_terms: Vec<String>,
}

fn phrase(s: &str) -> String {
    // quotes would end the phrase early
    s.replace('"', "")
}

/// Strip everything but letters, digits and spaces, collapsing runs of
/// whitespace.
fn strip_punctuation(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Tier expressions for one question. With no terms only the full-question
/// tier is produced.
pub fn formulate_queries(
    medicine_name: &str,
    query_text: &str,
    terms: &[String],
) -> Vec<QueryFormulation> {
    let lang = format!(" AND {LANGUAGE_FILTER}");
    let mut out = Vec::with_capacity(3);
    if !terms.is_empty() {
        let exact = terms
            .iter()
            .map(|t| format!("\"{}\"[tiab]", phrase(t)))
            .collect::<Vec<_>>()
            .join(" AND ");
        out.push(QueryFormulation {
            tier: Tier::ExactSentence,
            expression: format!("{exact}{lang}"),
            source_terms: terms.to_vec(),
        });
        let joined = terms
            .iter()
            .map(|t| phrase(t))
            .collect::<Vec<_>>()
            .join(" ");
        out.push(QueryFormulation {
            tier: Tier::ProximityTerms,
            expression: format!(
                "\"{joined}\"[tiab:~{PROXIMITY}] AND {}[ti]{lang}",
                phrase(medicine_name)
            ),
            source_terms: terms.to_vec(),
        });
    }
    out.push(QueryFormulation {
        tier: Tier::ProximityFull,
        expression: format!(
            "\"{}\"[tiab:~{PROXIMITY}]{lang}",
            strip_punctuation(query_text)
        ),
        source_terms: terms.to_vec(),
    });
    out
}

/// Union of pmid lists, first occurrence wins.
pub fn merge_dedup(results: &[Vec<String>]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    results
        .iter()
        .flatten()
        .filter(|p| seen.insert(p.as_str()))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_tiers() {
        let terms = vec!["using".to_string(), "ABACAVIR".to_string()];
        let q = formulate_queries("ABACAVIR", "Why am I using ABACAVIR?", &terms);
        assert_eq!(q.len(), 3);
        assert_eq!(
            q[0].expression,
            "\"using\"[tiab] AND \"ABACAVIR\"[tiab] AND english[la]"
        );
        assert_eq!(
            q[1].expression,
            "\"using ABACAVIR\"[tiab:~25] AND ABACAVIR[ti] AND english[la]"
        );
        assert_eq!(
            q[2].expression,
            "\"Why am I using ABACAVIR\"[tiab:~25] AND english[la]"
        );
    }

    #[test]
    fn single_term_and_empty_terms() {
        let q = formulate_queries("X", "tablet?", &["tablet".to_string()]);
        assert_eq!(q[0].expression, "\"tablet\"[tiab] AND english[la]");
        let q = formulate_queries("X", "Why?", &[]);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].tier, Tier::ProximityFull);
    }

    #[test]
    fn merge_keeps_first_seen_order() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(
            merge_dedup(&[s(&["1", "2"]), s(&["2", "3"])]),
            s(&["1", "2", "3"])
        );
        assert!(merge_dedup(&[vec![], vec![]]).is_empty());
        assert_eq!(merge_dedup(&[s(&["5"]), s(&["5"]), s(&["5"])]), s(&["5"]));
    }
}
