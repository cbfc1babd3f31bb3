//! Algebraic properties of the answer metrics.

use std::collections::BTreeMap;

use contrarag_core::embed::{EmbeddingProvider, HashingEmbedder};
use contrarag_core::evaluation::{
    embedding_similarity, jsd, kld, rouge_l, rouge_n, token_distribution, Distribution,
};
use proptest::prelude::*;

fn words() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop::sample::select(vec![
            "take", "two", "tablets", "daily", "with", "food", "avoid", "alcohol",
        ]),
        1..12,
    )
    .prop_map(|w| w.join(" "))
}

fn distribution() -> impl Strategy<Value = Distribution> {
    proptest::collection::btree_map(
        prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]),
        0.01f64..1.0,
        1..6,
    )
    .prop_map(|m| {
        let total: f64 = m.values().sum();
        m.into_iter()
            .map(|(k, v)| (k.to_string(), v / total))
            .collect::<BTreeMap<_, _>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rouge_f1_is_symmetric_and_bounded(a in words(), b in words()) {
        for score in [rouge_n(&a, &b, 1), rouge_n(&a, &b, 2), rouge_l(&a, &b)] {
            prop_assert!((0.0..=1.0).contains(&score));
        }
        prop_assert!((rouge_n(&a, &b, 1) - rouge_n(&b, &a, 1)).abs() < 1e-12);
        prop_assert!((rouge_n(&a, &b, 2) - rouge_n(&b, &a, 2)).abs() < 1e-12);
        prop_assert!((rouge_l(&a, &b) - rouge_l(&b, &a)).abs() < 1e-12);
        prop_assert_eq!(rouge_n(&a, &a, 1), 1.0);
        prop_assert_eq!(rouge_l(&a, &a), 1.0);
    }

    #[test]
    fn jsd_properties(p in distribution(), q in distribution()) {
        let d = jsd(&p, &q);
        prop_assert!((d - jsd(&q, &p)).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&d));
        prop_assert!(jsd(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn kld_is_non_negative(p in distribution(), q in distribution()) {
        let d = kld(&p, &q);
        prop_assert!(d >= 0.0 && d.is_finite());
        prop_assert!(kld(&p, &p).abs() < 1e-8);
    }

    #[test]
    fn token_distribution_sums_to_one(a in words()) {
        let d = token_distribution(&a).unwrap();
        prop_assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unit_norm_embeddings_make_cos_equal_dot(a in words(), b in words()) {
        struct Unit(HashingEmbedder);
        impl EmbeddingProvider for Unit {
            fn kind(&self) -> contrarag_core::embed::ProviderKind { self.0.kind() }
            fn model_tag(&self) -> &str { "unit" }
            fn dimension(&self) -> usize { self.0.dimension() }
            fn embed(&self, texts: &[&str]) -> Result<Vec<contrarag_core::embed::EmbeddingVector>, contrarag_core::ProviderError> {
                self.0.embed(texts)?.into_iter().map(|v| {
                    let n = v.norm() as f32;
                    Ok(v.scaled(1.0 / n).unwrap())
                }).collect()
            }
        }
        let s = embedding_similarity(&a, &b, &Unit(HashingEmbedder::new("h", 32))).unwrap();
        prop_assert!((s.cos - s.dot).abs() < 1e-6);
    }
}
