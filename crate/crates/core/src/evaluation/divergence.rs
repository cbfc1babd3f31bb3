use std::collections::{BTreeMap, BTreeSet};

/// Additive smoothing applied to `q` before KL divergence.
pub const KLD_SMOOTHING: f64 = 1e-10;

pub type Distribution = BTreeMap<String, f64>;

fn support<'a>(p: &'a Distribution, q: &'a Distribution) -> BTreeSet<&'a str> {
    p.keys().chain(q.keys()).map(String::as_str).collect()
}

fn prob(d: &Distribution, t: &str) -> f64 {
    d.get(t).copied().unwrap_or(0.0)
}

/// Jensen–Shannon divergence in nats; symmetric and bounded by ln 2.
pub fn jsd(p: &Distribution, q: &Distribution) -> f64 {
    let mut total = 0.0;
    for t in support(p, q) {
        let (pt, qt) = (prob(p, t), prob(q, t));
        let m = 0.5 * (pt + qt);
        if pt > 0.0 {
            total += 0.5 * pt * (pt / m).ln();
        }
        if qt > 0.0 {
            total += 0.5 * qt * (qt / m).ln();
        }
    }
    total.clamp(0.0, std::f64::consts::LN_2)
}

/// Kullback–Leibler divergence `KL(p ‖ q̃)` in nats, where `q̃` is `q` with
/// [`KLD_SMOOTHING`] added over the joint support and renormalized.
pub fn kld(p: &Distribution, q: &Distribution) -> f64 {
    let vocab = support(p, q);
    let z = 1.0 + KLD_SMOOTHING * vocab.len() as f64;
    let mut total = 0.0;
    for t in vocab {
        let pt = prob(p, t);
        if pt > 0.0 {
            let qt = (prob(q, t) + KLD_SMOOTHING) / z;
            total += pt * (pt / qt).ln();
        }
    }
    total.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn jsd_identities() {
        let p = dist(&[("a", 0.3), ("b", 0.7)]);
        assert_eq!(jsd(&p, &p), 0.0);
        let disjoint = jsd(&dist(&[("a", 1.0)]), &dist(&[("b", 1.0)]));
        assert!((disjoint - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn jsd_half_overlap() {
        let v = jsd(&dist(&[("a", 1.0)]), &dist(&[("a", 0.5), ("b", 0.5)]));
        // oracle: 0.5*ln(1/0.75) + 0.5*(0.5*ln(0.5/0.75) + 0.5*ln(0.5/0.25))
        let oracle =
            0.5 * (1.0f64 / 0.75).ln() + 0.5 * (0.5 * (0.5f64 / 0.75).ln() + 0.5 * 2.0f64.ln());
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.215762).abs() < 1e-5);
    }

    #[test]
    fn kld_identities() {
        let p = dist(&[("a", 0.25), ("b", 0.75)]);
        assert!(kld(&p, &p).abs() < 1e-8);
        let far = kld(&dist(&[("a", 1.0)]), &dist(&[("b", 1.0)]));
        let expected = ((1.0 + 2.0 * KLD_SMOOTHING) / KLD_SMOOTHING).ln();
        assert!((far - expected).abs() < 1e-9);
        assert!(far.is_finite() && far > 20.0);
    }

    #[test]
    fn kld_is_asymmetric() {
        let p = dist(&[("a", 0.9), ("b", 0.1)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        let pq = kld(&p, &q);
        let qp = kld(&q, &p);
        let oracle_pq = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((pq - oracle_pq).abs() < 1e-8);
        assert!((pq - qp).abs() > 1e-3);
    }
}
