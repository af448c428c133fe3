//! Web collection: search hits in, scored candidate pages out.
//!
//! Live search and crawling are out of scope. Hits come from JSONL result
//! files and page bodies from a [`PageFetcher`], by default one backed by a
//! fixture file.

mod defaults;
mod html;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_url, PageDocument, SearchResultRecord};
use crate::providers::prompts::PAGE_FILTER;
use crate::providers::{FanOut, Judge, JudgeRequest, ProviderError, SchemaId};

pub use html::html_to_text;

/// Characters of page text shown to the likelihood scorer.
pub const SCORE_TEXT_CHARS: usize = 4000;
pub const DEFAULT_KEEP_THRESHOLD: u8 = 6;

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {detail}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        detail: String,
    },
}

impl CollectError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    General,
    Themed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub theme: Theme,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub queries: Vec<Query>,
}

impl Default for QuerySet {
    fn default() -> Self {
        Self {
            queries: defaults::QUERIES
                .iter()
                .enumerate()
                .map(|(i, (theme, text))| Query {
                    id: format!("q{:02}", i + 1),
                    text: (*text).to_string(),
                    theme: *theme,
                })
                .collect(),
        }
    }
}

impl QuerySet {
    pub fn ids_unique(&self) -> bool {
        let mut seen = HashSet::new();
        self.queries.iter().all(|q| seen.insert(q.id.as_str()))
    }
}

/// Registrable domains whose hosts (and all subdomains) are excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocklist {
    pub base_domains: BTreeSet<String>,
}

impl Blocklist {
    /// The built-in list of social, marketplace and forum domains.
    pub fn builtin() -> Self {
        Self::parse(defaults::BLOCKED_DOMAINS)
    }

    /// One domain per line; `#` starts a comment; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        let base_domains = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        Self { base_domains }
    }

    pub fn load(path: &Path) -> Result<Self, CollectError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| CollectError::io(path, e))
    }

    /// True when `host` is a blocked domain or a subdomain of one. Matching
    /// is on whole labels, so `pinterest.com.evil.org` is not blocked.
    pub fn blocks_host(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let mut rest = host.as_str();
        loop {
            if self.base_domains.contains(rest) {
                return true;
            }
            match rest.split_once('.') {
                Some((_, parent)) => rest = parent,
                None => return false,
            }
        }
    }

    pub fn blocks_url(&self, url: &str) -> bool {
        url::Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(|h| self.blocks_host(h)))
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOutcome {
    /// Unique by normalized URL, in first-seen order, URLs normalized.
    pub records: Vec<SearchResultRecord>,
    pub n_raw: usize,
    /// Records dropped because their URL could not be normalized.
    pub n_bad_url: usize,
}

/// Collapses records to one per normalized URL. First occurrence wins.
pub fn dedup_records(records: impl IntoIterator<Item = SearchResultRecord>) -> IngestOutcome {
    let mut out = IngestOutcome::default();
    let mut seen = HashSet::new();
    for mut rec in records {
        out.n_raw += 1;
        let Ok(url) = normalize_url(&rec.url) else {
            tracing::warn!(url = %rec.url, "skipping search hit with bad url");
            out.n_bad_url += 1;
            continue;
        };
        if seen.insert(url.clone()) {
            rec.url = url;
            out.records.push(rec);
        }
    }
    out
}

/// Reads SERP result files (JSONL `{query_id, url, title, snippet}`) in the
/// given order and deduplicates by normalized URL.
pub fn ingest_serp(files: &[PathBuf]) -> Result<IngestOutcome, CollectError> {
    let mut all = Vec::new();
    for file in files {
        let reader = BufReader::new(File::open(file).map_err(|e| CollectError::io(file, e))?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CollectError::io(file, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SearchResultRecord =
                serde_json::from_str(&line).map_err(|e| CollectError::Parse {
                    file: file.clone(),
                    line: idx + 1,
                    detail: e.to_string(),
                })?;
            if rec.url.trim().is_empty() {
                return Err(CollectError::Parse {
                    file: file.clone(),
                    line: idx + 1,
                    detail: "empty url".into(),
                });
            }
            all.push(rec);
        }
    }
    Ok(dedup_records(all))
}

pub fn apply_blocklist(
    records: Vec<SearchResultRecord>,
    blocklist: &Blocklist,
) -> Vec<SearchResultRecord> {
    records
        .into_iter()
        .filter(|r| !blocklist.blocks_url(&r.url))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("no page available for {0}")]
    NotFound(String),
    #[error("fetch failed for {url}: {detail}")]
    Failed { url: String, detail: String },
}

/// Source of raw page HTML.
pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, FetchError>;
}

#[derive(Debug, Deserialize)]
struct FixturePage {
    url: String,
    html: String,
}

/// Serves HTML from a JSONL file of `{url, html}` records, keyed by
/// normalized URL.
#[derive(Debug, Default, Clone)]
pub struct FixtureFetcher {
    pages: BTreeMap<String, String>,
}

impl FixtureFetcher {
    pub fn from_pages(pages: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            pages: pages
                .into_iter()
                .map(|(u, h)| (normalize_url(&u).unwrap_or(u), h))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CollectError> {
        let file = File::open(path).map_err(|e| CollectError::io(path, e))?;
        let pages: Vec<FixturePage> =
            crate::model::read_jsonl(BufReader::new(file)).map_err(|e| match e {
                crate::model::JsonlError::Io(err) => CollectError::io(path, err),
                crate::model::JsonlError::Parse { line, source } => CollectError::Parse {
                    file: path.to_path_buf(),
                    line,
                    detail: source.to_string(),
                },
            })?;
        Ok(Self::from_pages(pages.into_iter().map(|p| (p.url, p.html))))
    }
}

impl PageFetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        self.pages
            .get(url)
            .cloned()
            .ok_or_else(|| FetchError::NotFound(url.to_string()))
    }
}

/// Plain HTTP GET with a timeout. No JavaScript, no robots handling.
#[derive(Debug, Clone)]
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    /// Must be called outside an async runtime.
    pub fn new(timeout: std::time::Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent("forge-collect/0.1")
            .build()
            .map_err(|e| FetchError::Failed {
                url: String::new(),
                detail: e.to_string(),
            })?;
        Ok(Self { client })
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        let failed = |detail: String| FetchError::Failed {
            url: url.to_string(),
            detail,
        };
        let resp = self.client.get(url).send().map_err(|e| failed(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(failed(format!("status {}", resp.status())));
        }
        resp.text().map_err(|e| failed(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchReport {
    pub requested: usize,
    pub fetched: usize,
    pub failed: usize,
    pub empty_text: usize,
}

/// Fetches each record's page and reduces it to text. Pages that fail to
/// fetch or have no text are skipped and counted.
pub fn fetch_pages(
    records: &[SearchResultRecord],
    fetcher: &dyn PageFetcher,
    fan_out: FanOut,
) -> (Vec<PageDocument>, FetchReport) {
    let fetched = fan_out.map(records, |r| fetcher.fetch(&r.url).map(|h| html_to_text(&h)));
    let mut report = FetchReport {
        requested: records.len(),
        ..FetchReport::default()
    };
    let mut docs = Vec::new();
    for (rec, result) in records.iter().zip(fetched) {
        match result {
            Ok(text) if text.is_empty() => report.empty_text += 1,
            Ok(text) => {
                report.fetched += 1;
                docs.push(PageDocument {
                    url: rec.url.clone(),
                    title: rec.title.clone(),
                    snippet: rec.snippet.clone(),
                    text,
                    likelihood: None,
                });
            }
            Err(e) => {
                tracing::warn!(error = %e, "page fetch failed");
                report.failed += 1;
            }
        }
    }
    (docs, report)
}

/// First `n` characters of `text`, on a char boundary.
pub(crate) fn truncate_chars(text: &str, n: usize) -> &str {
    match text.char_indices().nth(n) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[derive(Deserialize)]
struct ScoreReply {
    score: u8,
}

/// Asks the judge how likely the page is to contain challenge ideas, 0–10.
pub fn score_page(doc: &PageDocument, judge: &dyn Judge) -> Result<u8, ProviderError> {
    let request = JudgeRequest::new(PAGE_FILTER, SchemaId::LikelihoodScore)
        .bind("url", doc.url.as_str())
        .bind("title", doc.title.as_str())
        .bind("snippet", doc.snippet.as_str())
        .bind("text", truncate_chars(&doc.text, SCORE_TEXT_CHARS));
    let reply = judge.judge_json(&request)?;
    serde_json::from_value::<ScoreReply>(reply.value)
        .map(|r| r.score)
        .map_err(|e| ProviderError::InvalidResponse(e.to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub pages: usize,
    pub kept: usize,
    pub dropped: usize,
    /// Pages whose scoring failed; excluded from the output.
    pub unscored: usize,
    pub keep_threshold: u8,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    /// Every successfully scored page, with `likelihood` set.
    pub scored: Vec<PageDocument>,
    /// The subset of `scored` at or above the threshold, in input order.
    pub kept: Vec<PageDocument>,
    pub report: FilterReport,
}

/// Scores every page and keeps those with `score >= keep_threshold`.
pub fn filter_pages(
    docs: &[PageDocument],
    judge: &dyn Judge,
    fan_out: FanOut,
    keep_threshold: u8,
) -> FilterOutcome {
    let scores = fan_out.map(docs, |d| score_page(d, judge));
    let mut out = FilterOutcome {
        report: FilterReport {
            pages: docs.len(),
            keep_threshold,
            ..FilterReport::default()
        },
        ..FilterOutcome::default()
    };
    for (doc, score) in docs.iter().zip(scores) {
        match score {
            Ok(s) => {
                let doc = PageDocument {
                    likelihood: Some(s),
                    ..doc.clone()
                };
                if s >= keep_threshold {
                    out.report.kept += 1;
                    out.kept.push(doc.clone());
                } else {
                    out.report.dropped += 1;
                }
                out.scored.push(doc);
            }
            Err(e) => {
                tracing::warn!(url = %doc.url, error = %e, "page left unscored");
                out.report.unscored += 1;
            }
        }
    }
    out
}
