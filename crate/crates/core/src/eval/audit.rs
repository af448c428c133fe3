//! Worksheets for estimating dedup precision and recall by hand.
//!
//! The precision sheet samples removed challenges next to the survivor they
//! were folded into. The recall sheet samples survivors next to their five
//! nearest neighbors in the corpus as it stood before dedup, so an annotator
//! can count the survivors that still have a duplicate.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dedup::{RemovalStage, RemovedEntry};
use crate::model::Challenge;
use crate::providers::{Embedder, ProviderError};
use crate::store::{ChallengeStore, StoreError};

pub const DEFAULT_SAMPLE_SIZE: usize = 100;
pub const NEIGHBORS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("removed map names `{0}`, which is not in the corpus")]
    UnknownId(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeBrief {
    pub id: String,
    pub title: String,
    pub daily_action: String,
}

impl From<&Challenge> for ChallengeBrief {
    fn from(c: &Challenge) -> Self {
        Self {
            id: c.id.clone(),
            title: c.title.clone(),
            daily_action: c.daily_action.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub removed: ChallengeBrief,
    pub kept: ChallengeBrief,
    pub stage: RemovalStage,
    /// Left empty for the annotator.
    pub is_duplicate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub challenge: ChallengeBrief,
    pub similarity: f64,
    /// Whether this neighbor was itself removed by dedup.
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub survivor: ChallengeBrief,
    pub neighbors: Vec<Neighbor>,
    /// Left empty for the annotator.
    pub has_duplicate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worksheet<T> {
    pub population: usize,
    pub requested: usize,
    /// The sample was larger than the population, so everything was taken.
    pub truncated: bool,
    pub rows: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditWorksheets {
    pub seed: u64,
    pub precision: Worksheet<PrecisionRow>,
    pub recall: Worksheet<RecallRow>,
}

/// Seeded sample of `amount` positions in `0..population`, in ascending
/// order. Takes everything when `amount >= population`.
pub fn sample_positions(population: usize, amount: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    if amount >= population {
        return ((0..population).collect(), amount > population);
    }
    let mut picked = rand::seq::index::sample(rng, population, amount).into_vec();
    picked.sort_unstable();
    (picked, false)
}

/// Builds both worksheets. `before` is the corpus fed to dedup and `after`
/// its output; the embedder must be the one used for indexing.
pub fn audit_dedup(
    sample_size: usize,
    seed: u64,
    removed: &[RemovedEntry],
    before: &[Challenge],
    after: &[Challenge],
    embedder: &dyn Embedder,
) -> Result<AuditWorksheets, AuditError> {
    let by_id: HashMap<&str, &Challenge> = before.iter().map(|c| (c.id.as_str(), c)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| AuditError::UnknownId(id.to_string()))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (picked, truncated) = sample_positions(removed.len(), sample_size, &mut rng);
    let precision_rows = picked
        .into_iter()
        .map(|i| {
            let e = &removed[i];
            Ok(PrecisionRow {
                removed: lookup(&e.removed_id)?.into(),
                kept: lookup(&e.kept_id)?.into(),
                stage: e.stage,
                is_duplicate: None,
            })
        })
        .collect::<Result<Vec<_>, AuditError>>()?;
    let precision = Worksheet {
        population: removed.len(),
        requested: sample_size,
        truncated,
        rows: precision_rows,
    };

    let (picked, truncated) = sample_positions(after.len(), sample_size, &mut rng);
    let mut recall_rows = Vec::with_capacity(picked.len());
    if !picked.is_empty() {
        let texts: Vec<String> = before.iter().map(|c| c.daily_action.clone()).collect();
        let vectors = embedder.embed_batch(&texts)?;
        let dim = vectors.first().map_or(0, |v| v.dim());
        let index = ChallengeStore::new(dim, embedder.provider_tag(), before.iter().cloned().zip(vectors).collect())?;
        let removed_ids: std::collections::HashSet<&str> = removed.iter().map(|e| e.removed_id.as_str()).collect();
        let position: HashMap<&str, usize> = index
            .challenges()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        let want = NEIGHBORS.min(before.len().saturating_sub(1));
        for i in picked {
            let survivor = &after[i];
            let at = *position
                .get(survivor.id.as_str())
                .ok_or_else(|| AuditError::UnknownId(survivor.id.clone()))?;
            let query = index.vectors()[at].clone();
            let neighbors = index
                .topk_indices(&query, want + 1)?
                .into_iter()
                .filter(|&(j, _)| j != at)
                .take(want)
                .map(|(j, similarity)| {
                    let c = &index.challenges()[j];
                    Neighbor {
                        challenge: c.into(),
                        similarity,
                        removed: removed_ids.contains(c.id.as_str()),
                    }
                })
                .collect();
            recall_rows.push(RecallRow {
                survivor: survivor.into(),
                neighbors,
                has_duplicate: None,
            });
        }
    }
    let recall = Worksheet {
        population: after.len(),
        requested: sample_size,
        truncated,
        rows: recall_rows,
    };
    Ok(AuditWorksheets {
        seed,
        precision,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CreatedFrom;
    use crate::providers::mock::HashEmbedder;

    fn ch(i: usize, action: &str) -> Challenge {
        Challenge {
            id: crate::model::format_id(i),
            title: format!("T{i}"),
            description: String::new(),
            wish: "w".into(),
            daily_action: action.into(),
            source_url: "https://a.com".into(),
            created_from: CreatedFrom::Fixture,
        }
    }

    fn corpus(n: usize) -> Vec<Challenge> {
        (0..n).map(|i| ch(i, &format!("task number {i} with word{}", i % 3))).collect()
    }

    fn removed(n: usize) -> Vec<RemovedEntry> {
        (1..n)
            .step_by(2)
            .map(|i| RemovedEntry {
                removed_id: crate::model::format_id(i),
                kept_id: crate::model::format_id(i - 1),
                stage: RemovalStage::Cluster,
            })
            .collect()
    }

    #[test]
    fn seeded_and_sized() {
        let before = corpus(40);
        let gone = removed(40);
        let after: Vec<Challenge> = before.iter().step_by(2).cloned().collect();
        let e = HashEmbedder::new(1);
        let a = audit_dedup(5, 9, &gone, &before, &after, &e).unwrap();
        let b = audit_dedup(5, 9, &gone, &before, &after, &e).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.precision.rows.len(), 5);
        assert_eq!(a.recall.rows.len(), 5);
        assert!(a.recall.rows.iter().all(|r| r.neighbors.len() == 5));
        assert!(a
            .recall
            .rows
            .iter()
            .all(|r| r.neighbors.iter().all(|n| n.challenge.id != r.survivor.id)));
        let c = audit_dedup(5, 10, &gone, &before, &after, &e).unwrap();
        assert_ne!(a.precision.rows, c.precision.rows);
    }

    #[test]
    fn oversized_sample_takes_all() {
        let before = corpus(4);
        let gone = removed(4);
        let after = vec![before[0].clone(), before[2].clone()];
        let a = audit_dedup(100, 1, &gone, &before, &after, &HashEmbedder::new(1)).unwrap();
        assert!(a.precision.truncated && a.recall.truncated);
        assert_eq!(a.precision.rows.len(), 2);
        assert!(a.recall.rows.iter().all(|r| r.neighbors.len() == 3));
    }

    #[test]
    fn unknown_ids_rejected() {
        let before = corpus(2);
        let gone = vec![RemovedEntry {
            removed_id: "zzz".into(),
            kept_id: before[0].id.clone(),
            stage: RemovalStage::Prefilter,
        }];
        assert!(matches!(
            audit_dedup(1, 1, &gone, &before, &before, &HashEmbedder::new(1)),
            Err(AuditError::UnknownId(_))
        ));
    }
}
