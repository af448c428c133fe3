//! Stage runners. Artifacts live in the work directory:
//!
//! | stage   | reads                    | writes                                                        |
//! |---------|--------------------------|---------------------------------------------------------------|
//! | collect | SERP files, pages        | `serp_records.jsonl`, `pages.jsonl`, `collect_report.json`    |
//! | filter  | `pages.jsonl`            | `pages_scored.jsonl`, `pages_kept.jsonl`, `filter_report.json`|
//! | extract | `pages_kept.jsonl`       | `challenges.jsonl`, `extraction_report.json`, `extraction_rejected.jsonl` |
//! | dedup   | `challenges.jsonl`       | `challenges_dedup.jsonl`, `dedup_audit.json`, `removed_map.jsonl`, `dedup_pairs.jsonl` |
//! | index   | `challenges_dedup.jsonl` | the store file, `index_report.json`                           |
//! | eval    | store, query set         | `eval_report.json`, `eval_report.csv`, `pr_points.csv`        |
//! | audit   | dedup inputs and outputs | `audit_worksheets.json`                                       |

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use forge_core::collect::{
    apply_blocklist, fetch_pages, filter_pages, ingest_serp, Blocklist, CollectError, FixtureFetcher, HttpFetcher,
    PageFetcher,
};
use forge_core::dedup::Stopwords;
use forge_core::dedup::{dedup_run, DedupError, RemovedEntry};
use forge_core::eval::harness::{check_queries, EvalError};
use forge_core::eval::{audit_dedup, evaluate_search, write_reports, EvalReport, LabeledQuery};
use forge_core::extract::extract_all;
use forge_core::model::{read_jsonl, write_jsonl, Challenge, IdAllocator, PageDocument, SearchResultRecord};
use forge_core::providers::{FanOut, ProviderError, Providers};
use forge_core::search::{SearchError, SearchRequest, SearchResponse, Searcher};
use forge_core::store::{ChallengeStore, StoreError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::LoadedConfig;
use crate::manifest;
use crate::{write_json, CliError};

pub const SERP_RECORDS: &str = "serp_records.jsonl";
pub const PAGES: &str = "pages.jsonl";
pub const PAGES_SCORED: &str = "pages_scored.jsonl";
pub const PAGES_KEPT: &str = "pages_kept.jsonl";
pub const CHALLENGES: &str = "challenges.jsonl";
pub const CHALLENGES_DEDUP: &str = "challenges_dedup.jsonl";
pub const REMOVED_MAP: &str = "removed_map.jsonl";

fn provider_err(e: ProviderError) -> CliError {
    CliError::Provider(e.to_string())
}

fn providers(cfg: &LoadedConfig) -> Result<Providers, CliError> {
    cfg.config.providers.build(&cfg.base_dir).map_err(provider_err)
}

fn fan_out(cfg: &LoadedConfig) -> FanOut {
    FanOut::new(cfg.config.providers.max_in_flight)
}

fn require(stage: &'static str, path: PathBuf) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput { stage, path })
    }
}

fn read_items<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_items<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, items).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn collect_err(e: CollectError) -> CliError {
    match e {
        CollectError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
            CliError::MissingInput { stage: "collect", path }
        }
        CollectError::Io { path, source } => CliError::io(&path, source),
        parse @ CollectError::Parse { .. } => CliError::Config(parse.to_string()),
    }
}

fn stopwords(cfg: &LoadedConfig, stage: &'static str) -> Result<(Stopwords, Option<PathBuf>), CliError> {
    match &cfg.config.paths.stopwords {
        Some(p) => {
            let path = require(stage, cfg.resolve(p))?;
            let words = Stopwords::load(&path).map_err(|e| CliError::io(&path, e))?;
            Ok((words, Some(path)))
        }
        None => Ok((Stopwords::builtin(), None)),
    }
}

pub fn collect(cfg: &LoadedConfig) -> Result<(), CliError> {
    let paths = &cfg.config.paths;
    if paths.serp.is_empty() {
        return Err(CliError::Config("paths.serp lists no result files".into()));
    }
    let serp: Vec<PathBuf> = paths
        .serp
        .iter()
        .map(|p| require("collect", cfg.resolve(p)))
        .collect::<Result<_, _>>()?;
    let mut inputs: Vec<PathBuf> = serp.clone();

    let blocklist = match &paths.blocklist {
        Some(p) => {
            let path = require("collect", cfg.resolve(p))?;
            inputs.push(path.clone());
            Blocklist::load(&path).map_err(collect_err)?
        }
        None => Blocklist::builtin(),
    };
    let fetcher: Box<dyn PageFetcher> = match &paths.pages {
        Some(p) => {
            let path = require("collect", cfg.resolve(p))?;
            inputs.push(path.clone());
            Box::new(FixtureFetcher::load(&path).map_err(collect_err)?)
        }
        None => Box::new(
            HttpFetcher::new(Duration::from_secs(cfg.config.collect.fetch_timeout_secs))
                .map_err(|e| CliError::Internal(e.to_string()))?,
        ),
    };

    let ingested = ingest_serp(&serp).map_err(collect_err)?;
    let n_unique = ingested.records.len();
    let kept = apply_blocklist(ingested.records, &blocklist);
    let n_blocked = n_unique - kept.len();
    let (docs, fetch) = fetch_pages(&kept, fetcher.as_ref(), fan_out(cfg));

    let work = cfg.work_dir();
    let records_path = work.join(SERP_RECORDS);
    let pages_path = work.join(PAGES);
    let report_path = work.join("collect_report.json");
    write_items(&records_path, &kept)?;
    write_items(&pages_path, &docs)?;
    let counts = json!({
        "n_raw_results": ingested.n_raw,
        "n_bad_url": ingested.n_bad_url,
        "n_unique_urls": n_unique,
        "n_blocked": n_blocked,
        "n_after_blocklist": kept.len(),
        "fetch": fetch,
    });
    write_json(&report_path, &counts)?;
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let rec = manifest::record(cfg, "", &input_refs, &[&records_path, &pages_path, &report_path], counts)?;
    manifest::update(&work, "collect", rec)
}

pub fn filter(cfg: &LoadedConfig) -> Result<(), CliError> {
    let work = cfg.work_dir();
    let pages_path = require("filter", work.join(PAGES))?;
    let docs: Vec<PageDocument> = read_items(&pages_path)?;
    let p = providers(cfg)?;
    let out = filter_pages(&docs, p.judge.as_ref(), p.fan_out, cfg.config.collect.keep_threshold);

    let scored_path = work.join(PAGES_SCORED);
    let kept_path = work.join(PAGES_KEPT);
    let report_path = work.join("filter_report.json");
    write_items(&scored_path, &out.scored)?;
    write_items(&kept_path, &out.kept)?;
    write_json(&report_path, &out.report)?;
    let counts = serde_json::to_value(out.report).expect("report serializes");
    let rec = manifest::record(cfg, "", &[&pages_path], &[&scored_path, &kept_path, &report_path], counts)?;
    manifest::update(&work, "filter", rec)
}

pub fn extract(cfg: &LoadedConfig) -> Result<(), CliError> {
    let work = cfg.work_dir();
    let kept_path = require("extract", work.join(PAGES_KEPT))?;
    let docs: Vec<PageDocument> = read_items(&kept_path)?;
    let p = providers(cfg)?;
    let out = extract_all(&docs, p.judge.as_ref(), p.fan_out, &mut IdAllocator::new());

    let challenges_path = work.join(CHALLENGES);
    let report_path = work.join("extraction_report.json");
    let rejected_path = work.join("extraction_rejected.jsonl");
    write_items(&challenges_path, &out.challenges)?;
    write_json(&report_path, &out.report)?;
    let rejected: Vec<serde_json::Value> = out
        .batches
        .iter()
        .flat_map(|b| {
            b.rejected
                .iter()
                .map(move |r| json!({"page_url": b.page_url, "item": r.item, "violations": r.violations}))
        })
        .collect();
    write_items(&rejected_path, &rejected)?;
    let counts = serde_json::to_value(out.report).expect("report serializes");
    let rec = manifest::record(cfg, "", &[&kept_path], &[&challenges_path, &report_path, &rejected_path], counts)?;
    manifest::update(&work, "extract", rec)
}

pub fn dedup(cfg: &LoadedConfig) -> Result<(), CliError> {
    let work = cfg.work_dir();
    let input = require("dedup", work.join(CHALLENGES))?;
    let challenges: Vec<Challenge> = read_items(&input)?;
    let (stop, stop_path) = stopwords(cfg, "dedup")?;
    let p = providers(cfg)?;
    let mut dc = cfg.config.dedup;
    dc.seed = cfg.config.seed;
    let out = dedup_run(&challenges, &p, &stop, &dc).map_err(|e| match e {
        DedupError::Provider(e) => provider_err(e),
        other => CliError::Config(other.to_string()),
    })?;

    let deduped_path = work.join(CHALLENGES_DEDUP);
    let audit_path = work.join("dedup_audit.json");
    let removed_path = work.join(REMOVED_MAP);
    let pairs_path = work.join("dedup_pairs.jsonl");
    write_items(&deduped_path, &out.deduped)?;
    write_json(&audit_path, &out.audit)?;
    write_items(&removed_path, &out.removed)?;
    write_items(&pairs_path, &out.pairs)?;
    tracing::info!(timings = ?out.timings, "dedup stage timings");

    let mut inputs = vec![input.as_path()];
    if let Some(sp) = &stop_path {
        inputs.push(sp);
    }
    let counts = serde_json::to_value(out.audit).expect("audit serializes");
    let rec = manifest::record(
        cfg,
        &p.embedder.provider_tag(),
        &inputs,
        &[&deduped_path, &audit_path, &removed_path, &pairs_path],
        counts,
    )?;
    manifest::update(&work, "dedup", rec)
}

pub fn index(cfg: &LoadedConfig) -> Result<(), CliError> {
    let work = cfg.work_dir();
    let input = require("index", work.join(CHALLENGES_DEDUP))?;
    let challenges: Vec<Challenge> = read_items(&input)?;
    let p = providers(cfg)?;
    let tag = p.embedder.provider_tag();
    let vectors = if challenges.is_empty() {
        Vec::new()
    } else {
        let texts: Vec<String> = challenges.iter().map(|c| c.daily_action.clone()).collect();
        p.embedder.embed_batch(&texts).map_err(provider_err)?
    };
    let dim = vectors.first().map_or(0, |v| v.dim());
    let store = ChallengeStore::new(dim, tag.clone(), challenges.into_iter().zip(vectors).collect())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let store_path = cfg.store_path();
    if let Some(dir) = store_path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    store.save(&store_path).map_err(|e| CliError::Internal(e.to_string()))?;
    let report_path = work.join("index_report.json");
    let counts = json!({"count": store.len(), "dim": store.dim(), "provider_tag": tag});
    write_json(&report_path, &counts)?;
    let rec = manifest::record(cfg, &tag, &[&input], &[&store_path, &report_path], counts)?;
    manifest::update(&work, "index", rec)
}

fn open_searcher(cfg: &LoadedConfig, stage: &'static str) -> Result<Searcher, CliError> {
    let path = require(stage, cfg.store_path())?;
    let store = ChallengeStore::load(&path).map_err(|e| match e {
        StoreError::Io(io) => CliError::io(&path, io),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    let p = providers(cfg)?;
    Searcher::new(Arc::new(store), p).map_err(|e| CliError::Config(e.to_string()))
}

pub fn search(cfg: &LoadedConfig, request: &SearchRequest) -> Result<SearchResponse, CliError> {
    request.check().map_err(|e| CliError::Config(e.to_string()))?;
    let searcher = open_searcher(cfg, "search")?;
    searcher.search(request).map_err(|e| match e {
        SearchError::ServiceUnavailable(e) => provider_err(e),
        SearchError::BadRequest(msg) => CliError::Config(msg),
        SearchError::Store(e) => CliError::Internal(e.to_string()),
    })
}

pub fn serve(cfg: &LoadedConfig) -> Result<(), CliError> {
    // Blocking provider clients must be built before the runtime starts.
    let searcher = open_searcher(cfg, "serve")?;
    let s = &cfg.config.serve;
    let addr: SocketAddr = format!("{}:{}", s.host, s.port)
        .parse()
        .map_err(|e| CliError::Config(format!("serve address: {e}")))?;
    let ui_dir = cfg.config.paths.ui_dir.as_deref().map(|p| cfg.resolve(p));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime
        .block_on(forge_server::serve(addr, forge_server::AppState::new(searcher), ui_dir))
        .map_err(|e| CliError::Internal(format!("serve: {e}")))
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Io { path, source } => CliError::io(&path, source),
        EvalError::Csv(e) => CliError::Internal(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

pub fn eval(cfg: &LoadedConfig) -> Result<EvalReport, CliError> {
    let queries_path = cfg
        .config
        .paths
        .queries
        .as_deref()
        .ok_or_else(|| CliError::Config("paths.queries is not set".into()))?;
    let queries_path = require("eval", cfg.resolve(queries_path))?;
    let queries: Vec<LabeledQuery> = read_items(&queries_path)?;
    let searcher = open_searcher(cfg, "eval")?;
    let reports = cfg.reports_dir();
    if queries.is_empty() {
        let empty = EvalReport {
            config: json!({}),
            queries: 0,
            failed_rows: 0,
            rows: Vec::new(),
            aggregates: Vec::new(),
            pr_points: Vec::new(),
        };
        write_reports(&empty, &reports).map_err(eval_err)?;
        return Err(eval_err(EvalError::EmptyQuerySet));
    }
    let ids = searcher.store().challenges().iter().map(|c| c.id.as_str()).collect();
    check_queries(&queries, &ids).map_err(eval_err)?;
    let report = evaluate_search(&searcher, &queries, &cfg.config.eval).map_err(eval_err)?;
    let written = write_reports(&report, &reports).map_err(eval_err)?;

    let store_path = cfg.store_path();
    let counts = json!({
        "queries": report.queries,
        "rows": report.rows.len(),
        "failed_rows": report.failed_rows,
    });
    let outputs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    let rec = manifest::record(
        cfg,
        &searcher.providers().embedder.provider_tag(),
        &[&queries_path, &store_path],
        &outputs,
        counts,
    )?;
    manifest::update(&cfg.work_dir(), "eval", rec)?;
    Ok(report)
}

pub fn audit(cfg: &LoadedConfig) -> Result<(), CliError> {
    let work = cfg.work_dir();
    let before_path = require("audit", work.join(CHALLENGES))?;
    let after_path = require("audit", work.join(CHALLENGES_DEDUP))?;
    let removed_path = require("audit", work.join(REMOVED_MAP))?;
    let before: Vec<Challenge> = read_items(&before_path)?;
    let after: Vec<Challenge> = read_items(&after_path)?;
    let removed: Vec<RemovedEntry> = read_items(&removed_path)?;
    let p = providers(cfg)?;
    let sheets = audit_dedup(
        cfg.config.audit.sample_size,
        cfg.config.seed,
        &removed,
        &before,
        &after,
        p.embedder.as_ref(),
    )
    .map_err(|e| match e {
        forge_core::eval::audit::AuditError::Provider(e) => provider_err(e),
        other => CliError::Config(other.to_string()),
    })?;
    let out_path = cfg.reports_dir().join("audit_worksheets.json");
    write_json(&out_path, &sheets)?;
    let counts = json!({
        "precision_rows": sheets.precision.rows.len(),
        "precision_truncated": sheets.precision.truncated,
        "recall_rows": sheets.recall.rows.len(),
        "recall_truncated": sheets.recall.truncated,
    });
    let rec = manifest::record(
        cfg,
        &p.embedder.provider_tag(),
        &[&before_path, &after_path, &removed_path],
        &[&out_path],
        counts,
    )?;
    manifest::update(&work, "audit", rec)
}

/// The batch pipeline through evaluation.
pub fn all(cfg: &LoadedConfig) -> Result<(), CliError> {
    collect(cfg)?;
    filter(cfg)?;
    extract(cfg)?;
    dedup(cfg)?;
    index(cfg)?;
    eval(cfg).map(|_| ())
}

/// Reads the search hits written by `collect`.
pub fn read_serp_records(cfg: &LoadedConfig) -> Result<Vec<SearchResultRecord>, CliError> {
    read_items(&require("filter", cfg.work_dir().join(SERP_RECORDS))?)
}
