//! Semantic deduplication.
//!
//! The full pipeline runs four steps over challenges in input order:
//!
//! 1. string prefilter on normalized daily actions and titles;
//! 2. daily-action embeddings, exhaustive pairwise cosine, banded into
//!    match / ambiguous / non-match;
//! 3. the judge decides each ambiguous pair;
//! 4. greedy correlation clustering over confirmed pairs, one representative
//!    per cluster.
//!
//! [`DedupConfig::preset`] also builds the baselines and ablations used to
//! compare against: MinHash matching, single-threshold vector matching, and
//! transitive-closure clustering.

mod band;
mod cluster;
mod minhash;
mod normalize;
mod prefilter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::Challenge;
use crate::providers::prompts::PAIR_MATCH;
use crate::providers::{EmbeddingVector, FanOut, Judge, JudgeRequest, ProviderError, Providers, SchemaId};

pub use band::{pairwise_band, Band, BandedPairs, PairVerdict, Thresholds};
pub use cluster::{
    cluster_greedy, cluster_greedy_idx, cluster_transitive, cluster_transitive_idx,
    pick_representatives, representative, Cluster, MatchGraph,
};
pub use minhash::{exact_jaccard, minhash_pairs, shingles, MinHasher, DEFAULT_JACCARD, PERMUTATIONS};
pub use normalize::{normalize_for_match, NormalizedText, Stopwords};
pub use prefilter::{levenshtein_similarity, prefilter_pairs, PrefilterConfig, PrefilterOutcome};

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("invalid dedup config: {0}")]
    Config(String),
    #[error("duplicate challenge id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Embedding cosine with two-threshold banding.
    Embedding,
    /// MinHash estimated Jaccard over character shingles.
    Minhash,
}

/// What happens to pairs in the ambiguous band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguousPolicy {
    Judge,
    AcceptAll,
    RejectAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clustering {
    Greedy,
    Transitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Prefilter, banding, judge, greedy clustering.
    Full,
    /// Ambiguous pairs all count as matches.
    NoJudge,
    /// Transitive closure instead of greedy clustering.
    NoCorrelation,
    /// Single cosine threshold at `high`, transitive closure, no prefilter.
    VectorTransitive,
    /// MinHash matching, transitive closure, no prefilter.
    Minhash,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoJudge,
        Variant::NoCorrelation,
        Variant::VectorTransitive,
        Variant::Minhash,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub low: f64,
    pub high: f64,
    pub prefilter: bool,
    pub prefilter_action: f64,
    pub prefilter_title: f64,
    pub matcher: Matcher,
    pub jaccard: f64,
    pub ambiguous: AmbiguousPolicy,
    pub clustering: Clustering,
    /// Seed for the MinHash permutations.
    pub seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        let p = PrefilterConfig::default();
        Self {
            low: t.low,
            high: t.high,
            prefilter: true,
            prefilter_action: p.action,
            prefilter_title: p.title,
            matcher: Matcher::Embedding,
            jaccard: DEFAULT_JACCARD,
            ambiguous: AmbiguousPolicy::Judge,
            clustering: Clustering::Greedy,
            seed: 0,
        }
    }
}

impl DedupConfig {
    pub fn preset(variant: Variant) -> Self {
        let full = Self::default();
        match variant {
            Variant::Full => full,
            Variant::NoJudge => Self {
                ambiguous: AmbiguousPolicy::AcceptAll,
                ..full
            },
            Variant::NoCorrelation => Self {
                clustering: Clustering::Transitive,
                ..full
            },
            Variant::VectorTransitive => Self {
                prefilter: false,
                ambiguous: AmbiguousPolicy::RejectAll,
                clustering: Clustering::Transitive,
                ..full
            },
            Variant::Minhash => Self {
                prefilter: false,
                matcher: Matcher::Minhash,
                clustering: Clustering::Transitive,
                ..full
            },
        }
    }

    pub fn thresholds(&self) -> Result<Thresholds, DedupError> {
        Thresholds::new(self.low, self.high).map_err(DedupError::Config)
    }

    pub fn check(&self) -> Result<(), DedupError> {
        self.thresholds()?;
        if !(self.jaccard > 0.0 && self.jaccard <= 1.0) {
            return Err(DedupError::Config(format!("jaccard must be in (0, 1], got {}", self.jaccard)));
        }
        for (name, v) in [("prefilter_action", self.prefilter_action), ("prefilter_title", self.prefilter_title)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DedupError::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalStage {
    Prefilter,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedEntry {
    pub removed_id: String,
    /// The surviving representative the removed challenge maps to.
    pub kept_id: String,
    pub stage: RemovalStage,
}

/// Per-stage counts. Wall-clock timings are kept apart in
/// [`StageTimings`] so written audits stay reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupAudit {
    pub input: usize,
    pub prefilter_removed: usize,
    pub pairs_match: usize,
    pub pairs_ambiguous: usize,
    pub judge_true: usize,
    pub judge_failures: usize,
    pub clusters: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageTimings {
    pub prefilter: Duration,
    pub embed: Duration,
    pub pairs: Duration,
    pub judge: Duration,
    pub cluster: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    /// Representatives, ordered by id.
    pub deduped: Vec<Challenge>,
    /// One entry per removed challenge, in input order.
    pub removed: Vec<RemovedEntry>,
    pub audit: DedupAudit,
    pub timings: StageTimings,
    /// Materialized pairs (match and ambiguous bands) with verdicts.
    pub pairs: Vec<PairVerdict>,
    pub clusters: Vec<Cluster>,
    /// Daily-action embeddings of prefilter survivors, when the embedding
    /// matcher ran. Reused by indexing.
    pub vectors: BTreeMap<String, EmbeddingVector>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JudgeStats {
    pub calls: usize,
    pub true_count: usize,
    pub failures: usize,
}

#[derive(Deserialize)]
struct VerdictReply {
    duplicate: bool,
}

fn judge_pair(a: &Challenge, b: &Challenge, judge: &dyn Judge) -> Result<bool, ProviderError> {
    let request = JudgeRequest::new(PAIR_MATCH, SchemaId::DuplicateVerdict)
        .bind("a_title", a.title.as_str())
        .bind("a_action", a.daily_action.as_str())
        .bind("b_title", b.title.as_str())
        .bind("b_action", b.daily_action.as_str());
    let reply = judge.judge_json(&request)?;
    serde_json::from_value::<VerdictReply>(reply.value)
        .map(|v| v.duplicate)
        .map_err(|e| ProviderError::InvalidResponse(e.to_string()))
}

/// Asks the judge about every ambiguous pair. A failed call leaves the pair
/// a non-match and is counted.
pub fn judge_band(
    pairs: &mut [PairVerdict],
    challenges: &[Challenge],
    judge: &dyn Judge,
    fan_out: FanOut,
) -> JudgeStats {
    let by_id: HashMap<&str, &Challenge> = challenges.iter().map(|c| (c.id.as_str(), c)).collect();
    let ambiguous: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].band == Band::Ambiguous).collect();
    let answers: Vec<Result<bool, ProviderError>> = fan_out.map(&ambiguous, |&i| {
        let p = &pairs[i];
        match (by_id.get(p.a_id.as_str()), by_id.get(p.b_id.as_str())) {
            (Some(a), Some(b)) => judge_pair(a, b, judge),
            _ => Err(ProviderError::InvalidResponse(format!("unknown pair {} / {}", p.a_id, p.b_id))),
        }
    });
    let mut stats = JudgeStats {
        calls: ambiguous.len(),
        ..JudgeStats::default()
    };
    for (&i, answer) in ambiguous.iter().zip(answers) {
        match answer {
            Ok(v) => {
                stats.true_count += usize::from(v);
                pairs[i].resolve(Some(v));
            }
            Err(e) => {
                tracing::warn!(a = %pairs[i].a_id, b = %pairs[i].b_id, error = %e, "pair left unmatched");
                stats.failures += 1;
                pairs[i].resolve(None);
            }
        }
    }
    stats
}

fn apply_policy(pairs: &mut [PairVerdict], policy: AmbiguousPolicy) {
    let verdict = match policy {
        AmbiguousPolicy::AcceptAll => true,
        AmbiguousPolicy::RejectAll => false,
        AmbiguousPolicy::Judge => return,
    };
    for p in pairs.iter_mut().filter(|p| p.band == Band::Ambiguous) {
        p.is_final = verdict;
    }
}

fn elapsed(start: Instant) -> Duration {
    start.elapsed()
}

/// Runs the configured pipeline. Challenges are processed in input order,
/// which fixes the greedy clustering order and which challenge the
/// prefilter keeps.
pub fn dedup_run(
    challenges: &[Challenge],
    providers: &Providers,
    stopwords: &Stopwords,
    config: &DedupConfig,
) -> Result<DedupOutcome, DedupError> {
    config.check()?;
    let mut seen = HashSet::new();
    if let Some(dup) = challenges.iter().find(|c| !seen.insert(c.id.as_str())) {
        return Err(DedupError::DuplicateId(dup.id.clone()));
    }
    let mut out = DedupOutcome {
        audit: DedupAudit {
            input: challenges.len(),
            ..DedupAudit::default()
        },
        ..DedupOutcome::default()
    };

    let start = Instant::now();
    let pre = if config.prefilter {
        prefilter_pairs(
            challenges,
            stopwords,
            &PrefilterConfig {
                action: config.prefilter_action,
                title: config.prefilter_title,
            },
        )
    } else {
        PrefilterOutcome {
            survivors: (0..challenges.len()).collect(),
            removed: Vec::new(),
        }
    };
    out.timings.prefilter = elapsed(start);
    out.audit.prefilter_removed = pre.removed.len();
    let survivors: Vec<Challenge> = pre.survivors.iter().map(|&i| challenges[i].clone()).collect();

    let graph = match config.matcher {
        Matcher::Minhash => {
            let start = Instant::now();
            let g = minhash_pairs(&survivors, stopwords, config.jaccard, config.seed);
            out.timings.pairs = elapsed(start);
            out.audit.pairs_match = g.edge_count();
            g
        }
        Matcher::Embedding => {
            let mut graph = MatchGraph::new(survivors.iter().map(|c| c.id.clone()));
            if !survivors.is_empty() {
                let start = Instant::now();
                let texts: Vec<String> = survivors.iter().map(|c| c.daily_action.clone()).collect();
                let vectors = providers.embedder.embed_batch(&texts)?;
                out.timings.embed = elapsed(start);

                let start = Instant::now();
                let ids: Vec<String> = survivors.iter().map(|c| c.id.clone()).collect();
                let mut banded = pairwise_band(&ids, &vectors, config.thresholds()?)?;
                out.timings.pairs = elapsed(start);
                out.audit.pairs_match = banded.count(Band::Match);
                out.audit.pairs_ambiguous = banded.count(Band::Ambiguous);

                let start = Instant::now();
                if config.ambiguous == AmbiguousPolicy::Judge {
                    let stats = judge_band(&mut banded.pairs, &survivors, providers.judge.as_ref(), providers.fan_out);
                    out.audit.judge_true = stats.true_count;
                    out.audit.judge_failures = stats.failures;
                } else {
                    apply_policy(&mut banded.pairs, config.ambiguous);
                }
                out.timings.judge = elapsed(start);

                for p in banded.pairs.iter().filter(|p| p.is_final) {
                    graph.add_edge(&p.a_id, &p.b_id);
                }
                out.pairs = banded.pairs;
                out.vectors = ids.into_iter().zip(vectors).collect();
            }
            graph
        }
    };

    let start = Instant::now();
    let groups = match config.clustering {
        Clustering::Greedy => cluster_greedy(&graph),
        Clustering::Transitive => cluster_transitive(&graph),
    };
    let (clusters, deduped) = pick_representatives(&groups, &survivors);
    out.timings.cluster = elapsed(start);

    let mut rep_of: HashMap<&str, &str> = HashMap::new();
    for c in &clusters {
        for m in &c.member_ids {
            rep_of.insert(m.as_str(), c.representative_id.as_str());
        }
    }
    let mut removed: Vec<(usize, RemovedEntry)> = Vec::new();
    for &(r, k) in &pre.removed {
        removed.push((
            r,
            RemovedEntry {
                removed_id: challenges[r].id.clone(),
                kept_id: rep_of[challenges[k].id.as_str()].to_string(),
                stage: RemovalStage::Prefilter,
            },
        ));
    }
    for &i in &pre.survivors {
        let id = challenges[i].id.as_str();
        let rep = rep_of[id];
        if rep != id {
            removed.push((
                i,
                RemovedEntry {
                    removed_id: id.to_string(),
                    kept_id: rep.to_string(),
                    stage: RemovalStage::Cluster,
                },
            ));
        }
    }
    removed.sort_by_key(|(i, _)| *i);
    out.removed = removed.into_iter().map(|(_, e)| e).collect();
    out.audit.clusters = clusters.len();
    out.audit.output = deduped.len();
    out.clusters = clusters;
    out.deduped = deduped;
    tracing::info!(audit = ?out.audit, timings = ?out.timings, "dedup finished");
    Ok(out)
}

/// Removed-pair ground truth check: fraction of removed entries whose kept
/// challenge is in the same planted group, and the fraction of planted
/// duplicates removed. `group_of` maps every id to its group label.
pub fn score_against_groups(
    removed: &[RemovedEntry],
    group_of: &HashMap<String, String>,
) -> (f64, f64) {
    let correct = removed
        .iter()
        .filter(|e| group_of.get(&e.removed_id) == group_of.get(&e.kept_id))
        .count();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for g in group_of.values() {
        *sizes.entry(g.as_str()).or_default() += 1;
    }
    let planted: usize = sizes.values().map(|s| s - 1).sum();
    let precision = if removed.is_empty() { 1.0 } else { correct as f64 / removed.len() as f64 };
    let recall = if planted == 0 { 1.0 } else { correct as f64 / planted as f64 };
    (precision, recall)
}

/// JSON form of a config, for manifests and reports.
pub fn config_value(config: &DedupConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}
