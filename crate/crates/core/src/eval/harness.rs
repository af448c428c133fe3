use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::metrics::{hit_at_k, ndcg_at_k, prf_at_k};
use crate::providers::FanOut;
use crate::search::{SearchRequest, Searcher, DEFAULT_RETRIEVE_K};

/// Deepest cutoff scored; also the number of PR-curve points.
pub const EVAL_DEPTH: usize = 20;
pub const HEAD_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    General,
    FairlySpecific,
    UltraSpecific,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::General, Tier::FairlySpecific, Tier::UltraSpecific];

    pub fn label(self) -> &'static str {
        match self {
            Tier::General => "General",
            Tier::FairlySpecific => "Fairly Specific",
            Tier::UltraSpecific => "Ultra Specific",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub id: String,
    pub text: String,
    pub tier: Tier,
    pub relevant_ids: BTreeSet<String>,
}

/// Which search pipeline produced a row. `NoFiltering` skips validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunConfig {
    Filtering,
    NoFiltering,
}

impl RunConfig {
    pub const ALL: [RunConfig; 2] = [RunConfig::Filtering, RunConfig::NoFiltering];

    pub fn label(self) -> &'static str {
        match self {
            RunConfig::Filtering => "Full",
            RunConfig::NoFiltering => "- Filtering",
        }
    }

    fn validate(self) -> bool {
        self == RunConfig::Filtering
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("duplicate query id `{0}`")]
    DuplicateQuery(String),
    #[error("query `{query}` labels `{id}`, which is not in the corpus")]
    UnknownRelevantId { query: String, id: String },
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub retrieve_k: usize,
    pub max_in_flight: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            retrieve_k: DEFAULT_RETRIEVE_K,
            max_in_flight: FanOut::default().max_in_flight,
        }
    }
}

/// Metric values for one query under one configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub hit_at_3: f64,
    pub precision_at_3: f64,
    pub recall_at_3: f64,
    pub f1_at_3: f64,
    pub precision_at_20: f64,
    pub recall_at_20: f64,
    pub f1_at_20: f64,
    pub ndcg_at_20: f64,
}

impl Scores {
    fn of(ranked: &[String], relevant: &HashSet<String>) -> Self {
        let head = prf_at_k(ranked, relevant, HEAD_DEPTH);
        let deep = prf_at_k(ranked, relevant, EVAL_DEPTH);
        Self {
            hit_at_3: f64::from(hit_at_k(ranked, relevant, HEAD_DEPTH)),
            precision_at_3: head.precision,
            recall_at_3: head.recall,
            f1_at_3: head.f1,
            precision_at_20: deep.precision,
            recall_at_20: deep.recall,
            f1_at_20: deep.f1,
            ndcg_at_20: ndcg_at_k(ranked, relevant, EVAL_DEPTH),
        }
    }

    fn values(&self) -> [f64; 8] {
        [
            self.hit_at_3,
            self.precision_at_3,
            self.recall_at_3,
            self.f1_at_3,
            self.precision_at_20,
            self.recall_at_20,
            self.f1_at_20,
            self.ndcg_at_20,
        ]
    }

    fn from_values(v: [f64; 8]) -> Self {
        Self {
            hit_at_3: v[0],
            precision_at_3: v[1],
            recall_at_3: v[2],
            f1_at_3: v[3],
            precision_at_20: v[4],
            recall_at_20: v[5],
            f1_at_20: v[6],
            ndcg_at_20: v[7],
        }
    }

    fn mean<'a>(items: impl IntoIterator<Item = &'a Scores>) -> Option<Self> {
        let mut sum = [0.0; 8];
        let mut n = 0usize;
        for s in items {
            for (acc, v) in sum.iter_mut().zip(s.values()) {
                *acc += v;
            }
            n += 1;
        }
        (n > 0).then(|| Self::from_values(sum.map(|x| x / n as f64)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: String,
    pub tier: Tier,
    pub config: RunConfig,
    /// Provider failure message; failed rows carry zero scores and are left
    /// out of aggregates.
    pub error: Option<String>,
    pub degraded: bool,
    pub ranked_ids: Vec<String>,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: RunConfig,
    /// `None` for the overall row.
    pub tier: Option<Tier>,
    pub queries: usize,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub config: RunConfig,
    pub rank: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: Value,
    pub queries: usize,
    pub failed_rows: usize,
    pub rows: Vec<QueryRow>,
    pub aggregates: Vec<Aggregate>,
    pub pr_points: Vec<PrPoint>,
}

impl EvalReport {
    pub fn aggregate(&self, config: RunConfig, tier: Option<Tier>) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.config == config && a.tier == tier)
    }
}

pub fn check_queries(queries: &[LabeledQuery], corpus_ids: &HashSet<&str>) -> Result<(), EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let mut seen = HashSet::new();
    for q in queries {
        if !seen.insert(q.id.as_str()) {
            return Err(EvalError::DuplicateQuery(q.id.clone()));
        }
        if let Some(id) = q.relevant_ids.iter().find(|id| !corpus_ids.contains(id.as_str())) {
            return Err(EvalError::UnknownRelevantId {
                query: q.id.clone(),
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Runs every query with and without validation at depth 20 and scores
/// the results. Rows come out sorted by query id, then configuration.
pub fn evaluate_search(
    searcher: &Searcher,
    queries: &[LabeledQuery],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let corpus_ids: HashSet<&str> = searcher.store().challenges().iter().map(|c| c.id.as_str()).collect();
    check_queries(queries, &corpus_ids)?;
    let mut sorted: Vec<&LabeledQuery> = queries.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let jobs: Vec<(&LabeledQuery, RunConfig)> = sorted
        .iter()
        .flat_map(|q| RunConfig::ALL.map(|c| (*q, c)))
        .collect();
    let retrieve_k = config.retrieve_k.max(EVAL_DEPTH);
    let rows: Vec<QueryRow> = FanOut::new(config.max_in_flight).map(&jobs, |&(q, run)| {
        let request = SearchRequest {
            wish: q.text.clone(),
            k: EVAL_DEPTH,
            retrieve_k,
            validate: run.validate(),
        };
        let mut row = QueryRow {
            query_id: q.id.clone(),
            tier: q.tier,
            config: run,
            error: None,
            degraded: false,
            ranked_ids: Vec::new(),
            scores: Scores::default(),
        };
        match searcher.search(&request) {
            Ok(resp) => {
                row.degraded = resp.degraded;
                row.ranked_ids = resp.results.into_iter().map(|r| r.challenge.id).collect();
                let relevant: HashSet<String> = q.relevant_ids.iter().cloned().collect();
                row.scores = Scores::of(&row.ranked_ids, &relevant);
            }
            Err(e) => {
                tracing::warn!(query = %q.id, config = %run, error = %e, "query failed");
                row.error = Some(e.to_string());
            }
        }
        row
    });

    let ok = |run: RunConfig| rows.iter().filter(move |r| r.config == run && r.error.is_none());
    let mut aggregates = Vec::new();
    let mut pr_points = Vec::new();
    for run in RunConfig::ALL {
        for tier in std::iter::once(None).chain(Tier::ALL.map(Some)) {
            let members: Vec<&QueryRow> = ok(run).filter(|r| tier.map_or(true, |t| r.tier == t)).collect();
            aggregates.push(Aggregate {
                config: run,
                tier,
                queries: members.len(),
                scores: Scores::mean(members.iter().map(|r| &r.scores)).unwrap_or_default(),
            });
        }
        let scored: Vec<(&QueryRow, HashSet<String>)> = ok(run)
            .map(|r| {
                let q = sorted.iter().find(|q| q.id == r.query_id).expect("row from query");
                (r, q.relevant_ids.iter().cloned().collect())
            })
            .collect();
        for rank in 1..=EVAL_DEPTH {
            let n = scored.len().max(1) as f64;
            let (p, r) = scored.iter().fold((0.0, 0.0), |(p, r), (row, rel)| {
                let m = prf_at_k(&row.ranked_ids, rel, rank);
                (p + m.precision, r + m.recall)
            });
            pr_points.push(PrPoint {
                config: run,
                rank,
                precision: p / n,
                recall: r / n,
            });
        }
    }

    Ok(EvalReport {
        config: serde_json::json!({
            "depth": EVAL_DEPTH,
            "head_depth": HEAD_DEPTH,
            "retrieve_k": retrieve_k,
            "provider_tag": searcher.providers().embedder.provider_tag(),
        }),
        queries: sorted.len(),
        failed_rows: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
        aggregates,
        pr_points,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    query_id: &'a str,
    tier: Tier,
    config: &'static str,
    failed: bool,
    degraded: bool,
    hit_at_3: f64,
    precision_at_3: f64,
    recall_at_3: f64,
    f1_at_3: f64,
    precision_at_20: f64,
    recall_at_20: f64,
    f1_at_20: f64,
    ndcg_at_20: f64,
}

#[derive(Serialize)]
struct PrCsvRow {
    config: &'static str,
    rank: usize,
    precision: f64,
    recall: f64,
}

/// Writes `eval_report.json`, `eval_report.csv` and `pr_points.csv` into
/// `dir`; returns the paths written.
pub fn write_reports(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;

    let json_path = dir.join("eval_report.json");
    let mut json = serde_json::to_vec_pretty(report).expect("report serializes");
    json.push(b'\n');
    std::fs::write(&json_path, json).map_err(io(&json_path))?;

    let rows_path = dir.join("eval_report.csv");
    let mut w = csv::Writer::from_path(&rows_path)?;
    for r in &report.rows {
        let s = &r.scores;
        w.serialize(CsvRow {
            query_id: &r.query_id,
            tier: r.tier,
            config: r.config.label(),
            failed: r.error.is_some(),
            degraded: r.degraded,
            hit_at_3: s.hit_at_3,
            precision_at_3: s.precision_at_3,
            recall_at_3: s.recall_at_3,
            f1_at_3: s.f1_at_3,
            precision_at_20: s.precision_at_20,
            recall_at_20: s.recall_at_20,
            f1_at_20: s.f1_at_20,
            ndcg_at_20: s.ndcg_at_20,
        })?;
    }
    w.flush().map_err(io(&rows_path))?;

    let pr_path = dir.join("pr_points.csv");
    let mut w = csv::Writer::from_path(&pr_path)?;
    for p in &report.pr_points {
        w.serialize(PrCsvRow {
            config: p.config.label(),
            rank: p.rank,
            precision: p.precision,
            recall: p.recall,
        })?;
    }
    w.flush().map_err(io(&pr_path))?;
    Ok(vec![json_path, rows_path, pr_path])
}

/// Renders the aggregate table with the tier columns side by side.
pub fn summary_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let columns: Vec<Option<Tier>> = std::iter::once(None).chain(Tier::ALL.map(Some)).collect();
    let _ = write!(out, "{:<14}{:<12}", "config", "metric");
    for t in &columns {
        let _ = write!(out, "{:>16}", t.map_or("Overall", Tier::label));
    }
    out.push('\n');
    let names = ["Hit@3", "P@3", "R@3", "F1@3", "P@20", "R@20", "F1@20", "NDCG@20"];
    for run in RunConfig::ALL {
        for (i, name) in names.iter().enumerate() {
            let _ = write!(out, "{:<14}{:<12}", run.label(), name);
            for t in &columns {
                let v = report.aggregate(run, *t).map_or(0.0, |a| a.scores.values()[i]);
                let _ = write!(out, "{v:>16.3}");
            }
            out.push('\n');
        }
    }
    out
}
