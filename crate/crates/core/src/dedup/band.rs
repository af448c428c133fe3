use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::providers::{dot, EmbeddingVector, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Match,
    Ambiguous,
    NonMatch,
}

/// Similarity thresholds. `sim >= high` is a match, `sim < low` a
/// non-match, anything between is ambiguous (so `sim == low` is ambiguous).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            low: 0.625,
            high: 0.7,
        }
    }
}

impl Thresholds {
    pub fn new(low: f64, high: f64) -> Result<Self, String> {
        let t = Self { low, high };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), String> {
        if (0.0..=1.0).contains(&self.low) && (0.0..=1.0).contains(&self.high) && self.low < self.high {
            Ok(())
        } else {
            Err(format!(
                "thresholds must satisfy 0 <= low < high <= 1, got low={} high={}",
                self.low, self.high
            ))
        }
    }

    pub fn classify(&self, similarity: f64) -> Band {
        if similarity >= self.high {
            Band::Match
        } else if similarity >= self.low {
            Band::Ambiguous
        } else {
            Band::NonMatch
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a_id: String,
    pub b_id: String,
    pub similarity: f64,
    pub band: Band,
    pub judge_verdict: Option<bool>,
    #[serde(rename = "final")]
    pub is_final: bool,
}

impl PairVerdict {
    pub fn new(a_id: &str, b_id: &str, similarity: f64, band: Band) -> Self {
        let (a_id, b_id) = if a_id <= b_id { (a_id, b_id) } else { (b_id, a_id) };
        Self {
            a_id: a_id.to_string(),
            b_id: b_id.to_string(),
            similarity,
            band,
            judge_verdict: None,
            is_final: band == Band::Match,
        }
    }

    /// Records the judge's answer and recomputes the final flag.
    pub fn resolve(&mut self, verdict: Option<bool>) {
        self.judge_verdict = verdict;
        self.is_final = self.band == Band::Match
            || (self.band == Band::Ambiguous && verdict == Some(true));
    }
}

/// Banded pairs. Only match and ambiguous pairs are materialized; the
/// non-match band is counted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BandedPairs {
    pub pairs: Vec<PairVerdict>,
    pub non_match: usize,
}

impl BandedPairs {
    pub fn count(&self, band: Band) -> usize {
        match band {
            Band::NonMatch => self.non_match,
            b => self.pairs.iter().filter(|p| p.band == b).count(),
        }
    }
}

/// Exhaustive pairwise cosine over unit vectors, banded. Rows are computed
/// in parallel; output order is row-major over the input order, so it does
/// not depend on scheduling.
pub fn pairwise_band(
    ids: &[String],
    vectors: &[EmbeddingVector],
    thresholds: Thresholds,
) -> Result<BandedPairs, ProviderError> {
    assert_eq!(ids.len(), vectors.len(), "one vector per id");
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.dim() != first.dim()) {
            return Err(ProviderError::DimensionMismatch {
                expected: first.dim(),
                actual: bad.dim(),
            });
        }
    }
    let rows: Vec<(Vec<PairVerdict>, usize)> = (0..vectors.len())
        .into_par_iter()
        .map(|i| {
            let mut kept = Vec::new();
            let mut skipped = 0;
            for j in i + 1..vectors.len() {
                let sim = dot(vectors[i].values(), vectors[j].values());
                match thresholds.classify(sim) {
                    Band::NonMatch => skipped += 1,
                    band => kept.push(PairVerdict::new(&ids[i], &ids[j], sim, band)),
                }
            }
            (kept, skipped)
        })
        .collect();
    let mut out = BandedPairs::default();
    for (kept, skipped) in rows {
        out.pairs.extend(kept);
        out.non_match += skipped;
    }
    Ok(out)
}
