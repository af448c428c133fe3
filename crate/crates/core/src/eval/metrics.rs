//! Ranking metrics with binary relevance, and the dedup recall estimate.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} = {value} is outside [0, 1]")]
pub struct DomainError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// The relevant set was empty; all three values are 0 by definition.
    pub empty_relevant: bool,
}

fn hits_in_top(ranked: &[String], relevant: &HashSet<String>, k: usize) -> usize {
    ranked.iter().take(k).filter(|id| relevant.contains(*id)).count()
}

/// 1 if any of the first `k` ids is relevant.
pub fn hit_at_k(ranked: &[String], relevant: &HashSet<String>, k: usize) -> u8 {
    assert!(k >= 1, "k must be at least 1");
    u8::from(hits_in_top(ranked, relevant, k) > 0)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision divides by `k` even when fewer than `k` results came back.
/// Recall divides by `min(k, |relevant|)` so a perfect top-k scores 1.
pub fn prf_at_k(ranked: &[String], relevant: &HashSet<String>, k: usize) -> Prf {
    assert!(k >= 1, "k must be at least 1");
    if relevant.is_empty() {
        return Prf {
            empty_relevant: true,
            ..Prf::default()
        };
    }
    let hits = hits_in_top(ranked, relevant, k) as f64;
    let precision = hits / k as f64;
    let recall = hits / k.min(relevant.len()) as f64;
    Prf {
        precision,
        recall,
        f1: f1(precision, recall),
        empty_relevant: false,
    }
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

pub fn ndcg_at_k(ranked: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| relevant.contains(*id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

fn unit(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(DomainError { name, value })
    }
}

/// Estimated fraction of duplicates removed, from audited removal precision,
/// the removed fraction of the corpus, and the audited fraction `m` of
/// survivors that still have a duplicate.
pub fn dedup_recall_estimate(precision: f64, removed_frac: f64, m: f64) -> Result<f64, DomainError> {
    let precision = unit("precision", precision)?;
    let removed_frac = unit("removed_frac", removed_frac)?;
    let m = unit("m", m)?;
    let true_removed = precision * removed_frac;
    if true_removed == 0.0 {
        return Ok(0.0);
    }
    Ok(true_removed / (true_removed + m * (1.0 - removed_frac)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(pattern: &[u8]) -> (Vec<String>, HashSet<String>) {
        let ranked: Vec<String> = (0..pattern.len()).map(|i| format!("d{i}")).collect();
        let rel = ranked
            .iter()
            .zip(pattern)
            .filter(|(_, &r)| r == 1)
            .map(|(id, _)| id.clone())
            .collect();
        (ranked, rel)
    }

    #[test]
    fn prf_two_of_three_with_five_relevant() {
        let (ranked, mut rel) = ids(&[1, 1, 0]);
        for i in 0..3 {
            rel.insert(format!("missing{i}"));
        }
        let m = prf_at_k(&ranked, &rel, 3);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn prf_edges() {
        let (ranked, rel) = ids(&[1, 1, 1]);
        let m = prf_at_k(&ranked, &rel, 3);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let (ranked, _) = ids(&[0, 0, 0]);
        let m = prf_at_k(&ranked, &HashSet::from(["z".to_string()]), 3);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = prf_at_k(&ranked, &HashSet::new(), 3);
        assert!(m.empty_relevant);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn hit_cases() {
        let (ranked, rel) = ids(&[1, 0, 0]);
        assert_eq!(hit_at_k(&ranked, &rel, 3), 1);
        let (ranked, rel) = ids(&[0, 0, 0, 1]);
        assert_eq!(hit_at_k(&ranked, &rel, 3), 0);
    }

    #[test]
    fn ndcg_hand_computed() {
        // [1,0,1]: DCG = 1 + 1/log2(4) = 1.5, iDCG = 1 + 1/log2(3).
        let (ranked, rel) = ids(&[1, 0, 1]);
        let want = 1.5 / (1.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&ranked, &rel, 3) - want).abs() < 1e-12);
        assert!((want - 0.9197).abs() < 1e-4);
        let (ranked, rel) = ids(&[1, 1, 0]);
        assert_eq!(ndcg_at_k(&ranked, &rel, 3), 1.0);
        assert_eq!(ndcg_at_k(&ranked, &HashSet::new(), 3), 0.0);
    }

    #[test]
    fn recall_estimate() {
        assert!((dedup_recall_estimate(0.9, 0.5, 0.1).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(dedup_recall_estimate(0.9, 0.5, 0.0).unwrap(), 1.0);
        assert_eq!(dedup_recall_estimate(0.0, 0.5, 0.3).unwrap(), 0.0);
        assert!(dedup_recall_estimate(1.1, 0.5, 0.1).is_err());
        assert!(dedup_recall_estimate(0.5, -0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn recall_never_exceeds_one(pattern in proptest::collection::vec(0u8..2, 0..30), extra in 0usize..5, k in 1usize..25) {
            let (ranked, mut rel) = ids(&pattern);
            for i in 0..extra {
                rel.insert(format!("x{i}"));
            }
            let m = prf_at_k(&ranked, &rel, k);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let n = ndcg_at_k(&ranked, &rel, k);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        }

        #[test]
        fn ndcg_is_one_iff_relevant_first(pattern in proptest::collection::vec(0u8..2, 1..12), k in 1usize..12) {
            let (ranked, rel) = ids(&pattern);
            prop_assume!(!rel.is_empty());
            let top = &pattern[..k.min(pattern.len())];
            let want_hits = k.min(rel.len());
            let perfect = top.iter().take(want_hits).all(|&r| r == 1) && top.len() >= want_hits;
            let n = ndcg_at_k(&ranked, &rel, k);
            prop_assert_eq!((n - 1.0).abs() < 1e-12, perfect);
        }

        #[test]
        fn estimate_monotone(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, r in 0.01f64..0.99, m1 in 0.0f64..=1.0, m2 in 0.0f64..=1.0) {
            let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let (mlo, mhi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            prop_assert!(dedup_recall_estimate(plo, r, mlo).unwrap() <= dedup_recall_estimate(phi, r, mlo).unwrap() + 1e-15);
            prop_assert!(dedup_recall_estimate(plo, r, mhi).unwrap() <= dedup_recall_estimate(plo, r, mlo).unwrap() + 1e-15);
        }
    }
}
