use std::collections::HashMap;

use super::text::tokenize;

fn f1(overlap: f64, candidate_len: f64, reference_len: f64) -> f64 {
    if overlap == 0.0 || candidate_len == 0.0 || reference_len == 0.0 {
        return 0.0;
    }
    let precision = overlap / candidate_len;
    let recall = overlap / reference_len;
    2.0 * precision * recall / (precision + recall)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-N F1 with clipped n-gram counts.
pub fn rouge_n(reference: &str, candidate: &str, n: usize) -> f64 {
    let reference = tokenize(reference);
    let candidate = tokenize(candidate);
    let ref_counts = ngram_counts(&reference, n);
    let cand_counts = ngram_counts(&candidate, n);
    let overlap: usize = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    f1(
        overlap as f64,
        cand_counts.values().sum::<usize>() as f64,
        ref_counts.values().sum::<usize>() as f64,
    )
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common token subsequence.
pub fn rouge_l(reference: &str, candidate: &str) -> f64 {
    let reference = tokenize(reference);
    let candidate = tokenize(candidate);
    let lcs = lcs_len(&reference, &candidate);
    f1(lcs as f64, candidate.len() as f64, reference.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_score_one() {
        let t = "take two tablets daily with food";
        assert_eq!(rouge_n(t, t, 1), 1.0);
        assert_eq!(rouge_n(t, t, 2), 1.0);
        assert_eq!(rouge_l(t, t), 1.0);
    }

    #[test]
    fn unigram_hand_count() {
        let r = rouge_n("take two tablets daily", "take two tablets", 1);
        // P = 1, R = 3/4
        assert!((r - 0.857143).abs() < 1e-6);
        assert!((r - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_and_empty() {
        assert_eq!(rouge_n("alpha beta", "gamma delta", 1), 0.0);
        assert_eq!(rouge_n("", "gamma", 1), 0.0);
        assert_eq!(rouge_n("one", "one", 2), 0.0);
        assert_eq!(rouge_l("", ""), 0.0);
    }

    #[test]
    fn counts_are_clipped() {
        // candidate repeats "the" 3 times, reference once
        let r = rouge_n("the cat", "the the the", 1);
        let p = 1.0 / 3.0;
        let rc = 1.0 / 2.0;
        assert!((r - 2.0 * p * rc / (p + rc)).abs() < 1e-12);
    }

    #[test]
    fn lcs_hand_examples() {
        assert!((rouge_l("a b c d", "a c d") - 6.0 / 7.0).abs() < 1e-12);
        let rev = rouge_l("a b c", "c b a");
        assert!((rev - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bigram_example() {
        // ref bigrams: take-two two-tablets tablets-daily; cand: take-two two-tablets
        let r = rouge_n("take two tablets daily", "take two tablets", 2);
        assert!((r - 0.8).abs() < 1e-12);
    }
}
