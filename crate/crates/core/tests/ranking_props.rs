//! Ranking against independently recomputed scores.

use contrarag_core::embed::{cosine, EmbeddingVector};
use contrarag_core::ranking::{rank_candidates, Candidate, RankingParams};
use proptest::prelude::*;

fn ocos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Vectors rounded through f32 so the oracle sees what the index stores.
fn f32_round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x as f32)).collect()
}

fn oracle(
    q: &[f64],
    docs: &[(String, i32, Vec<f64>)],
    lambda: f64,
    alpha: f64,
) -> Vec<(String, f64)> {
    let n = docs.len();
    let min = docs.iter().map(|d| d.1).min().unwrap();
    let max = docs.iter().map(|d| d.1).max().unwrap();
    let mut out: Vec<(String, f64)> = (0..n)
        .map(|i| {
            let s = ocos(q, &docs[i].2);
            let r = if n == 1 {
                0.0
            } else {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| ocos(&docs[i].2, &docs[j].2))
                    .fold(f64::MIN, f64::max)
            };
            let mmr = lambda * s - (1.0 - lambda) * r;
            let tau = f64::from(docs[i].1 - min) / (f64::from(max - min) + 1e-5);
            (docs[i].0.clone(), alpha * mmr + (1.0 - alpha) * tau)
        })
        .collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap().then(
            a.0.parse::<u64>()
                .unwrap()
                .cmp(&b.0.parse::<u64>().unwrap()),
        )
    });
    out
}

fn nonzero(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

type Case = (Vec<f64>, Vec<(String, i32, Vec<f64>)>);

fn case() -> impl Strategy<Value = Case> {
    (2usize..6, 1usize..=8).prop_flat_map(|(dim, n)| {
        (
            nonzero(dim),
            proptest::collection::vec((1990i32..2025, nonzero(dim)), n).prop_map(|docs| {
                docs.into_iter()
                    .enumerate()
                    .map(|(i, (y, v))| ((i * 37 % 101 + 1).to_string(), y, f32_round(&v)))
                    .collect()
            }),
        )
    })
}

fn candidates(docs: &[(String, i32, Vec<f64>)]) -> Vec<Candidate<'_>> {
    docs.iter()
        .map(|(p, y, v)| Candidate {
            pmid: p,
            year: *y,
            vector: EmbeddingVector::from_f64(v).unwrap(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ordering_matches_oracle((q, docs) in case()) {
        let q = f32_round(&q);
        let params = RankingParams::default();
        let ranked = rank_candidates(&EmbeddingVector::from_f64(&q).unwrap(), &candidates(&docs), &params).unwrap();
        let expected = oracle(&q, &docs, 0.7, 0.7);
        prop_assert_eq!(ranked.len(), docs.len());
        for (got, (pmid, score)) in ranked.iter().zip(&expected) {
            prop_assert!((got.score - score).abs() < 1e-9);
            if &got.pmid != pmid {
                // only acceptable when the two scores are numerically tied
                let other = expected.iter().find(|e| e.0 == got.pmid).unwrap().1;
                prop_assert!((other - score).abs() < 1e-12, "{} vs {}", got.pmid, pmid);
            }
        }
        for d in &ranked {
            prop_assert!((d.mmr - (0.7 * d.relevance - 0.3 * d.redundancy)).abs() <= 1e-12);
            prop_assert!((d.score - (0.7 * d.mmr + 0.3 * d.tau)).abs() <= 1e-12);
            prop_assert!((0.0..1.0).contains(&d.tau));
        }
    }

    #[test]
    fn positive_scaling_keeps_order((q, docs) in case(), c in 0.01f32..100.0) {
        let params = RankingParams::default();
        let qv = EmbeddingVector::from_f64(&q).unwrap();
        let base = rank_candidates(&qv, &candidates(&docs), &params).unwrap();
        let scaled: Vec<Candidate<'_>> = candidates(&docs)
            .into_iter()
            .map(|mut cand| {
                cand.vector = cand.vector.scaled(c).unwrap();
                cand
            })
            .collect();
        let other = rank_candidates(&qv.scaled(c).unwrap(), &scaled, &params).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert!((a.score - b.score).abs() < 1e-6);
        }
        let gap_ok = base.windows(2).all(|w| w[0].score - w[1].score > 1e-5);
        if gap_ok {
            let ids = |r: &[contrarag_core::ranking::ScoredDocument]| r.iter().map(|d| d.pmid.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&base), ids(&other));
        }
    }

    #[test]
    fn cosine_symmetric_and_bounded(a in nonzero(5), b in nonzero(5)) {
        let (x, y) = (EmbeddingVector::from_f64(&a).unwrap(), EmbeddingVector::from_f64(&b).unwrap());
        let c = cosine(&x, &y).unwrap();
        prop_assert_eq!(c, cosine(&y, &x).unwrap());
        prop_assert!((-1.0..=1.0).contains(&c));
    }

    #[test]
    fn output_is_a_permutation((q, docs) in case(), lambda in 0.0f64..=1.0, alpha in 0.0f64..=1.0) {
        let params = RankingParams { lambda, alpha, ..RankingParams::default() };
        let ranked = rank_candidates(&EmbeddingVector::from_f64(&q).unwrap(), &candidates(&docs), &params).unwrap();
        let mut got: Vec<&str> = ranked.iter().map(|d| d.pmid.as_str()).collect();
        let mut want: Vec<&str> = docs.iter().map(|d| d.0.as_str()).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }
}
