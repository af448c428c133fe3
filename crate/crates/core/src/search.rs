//! Goal-driven search: embed the wish, retrieve by cosine, rerank on daily
//! actions, then let the judge drop candidates that do not serve the wish.
//!
//! Rerank and validation failures never fail a request. The response falls
//! back to the previous stage's order and sets `degraded`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::model::Challenge;
use crate::providers::prompts::VALIDATE_RESULTS;
use crate::providers::{check_rerank_output, Embedder, Judge, JudgeRequest, ProviderError, Providers, Reranker, SchemaId};
use crate::store::{ChallengeStore, StoreError};

pub const DEFAULT_K: usize = 5;
pub const MAX_K: usize = 50;
pub const DEFAULT_RETRIEVE_K: usize = 50;
pub const MAX_RETRIEVE_K: usize = 200;
/// Candidates shown to the validation judge.
pub const VALIDATION_DEPTH: usize = 20;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("embedding provider unavailable: {0}")]
    ServiceUnavailable(ProviderError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchRequest {
    pub wish: String,
    pub k: usize,
    pub retrieve_k: usize,
    pub validate: bool,
}

impl Default for SearchRequest {
    fn default() -> Self {
        Self {
            wish: String::new(),
            k: DEFAULT_K,
            retrieve_k: DEFAULT_RETRIEVE_K,
            validate: true,
        }
    }
}

impl SearchRequest {
    pub fn new(wish: impl Into<String>) -> Self {
        Self {
            wish: wish.into(),
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), SearchError> {
        if self.wish.trim().is_empty() {
            return Err(SearchError::BadRequest("wish is empty".into()));
        }
        if !(1..=self.retrieve_k).contains(&self.k) || self.retrieve_k > MAX_RETRIEVE_K {
            return Err(SearchError::BadRequest(format!(
                "need 1 <= k <= retrieve_k <= {MAX_RETRIEVE_K}, got k={} retrieve_k={}",
                self.k, self.retrieve_k
            )));
        }
        Ok(())
    }
}

/// One ranked candidate as it moves through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    #[serde(flatten)]
    pub challenge: Challenge,
    pub retrieval_score: f64,
    pub rerank_score: Option<f64>,
    /// True once the validation judge has kept this item.
    pub validated: bool,
    /// 1-based; 0 until ranks are assigned.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub degraded: bool,
    pub results: Vec<SearchResult>,
}

pub fn retrieve(
    store: &ChallengeStore,
    embedder: &dyn Embedder,
    wish: &str,
    retrieve_k: usize,
) -> Result<Vec<SearchResult>, SearchError> {
    if store.is_empty() {
        return Ok(Vec::new());
    }
    let query = embedder
        .embed_batch(&[wish.to_string()])
        .map_err(SearchError::ServiceUnavailable)?
        .pop()
        .ok_or_else(|| SearchError::ServiceUnavailable(ProviderError::InvalidResponse("no vector".into())))?;
    Ok(store
        .topk_indices(&query, retrieve_k)?
        .into_iter()
        .map(|(i, score)| SearchResult {
            challenge: store.challenges()[i].clone(),
            retrieval_score: score,
            rerank_score: None,
            validated: false,
            rank: 0,
        })
        .collect())
}

/// Reorders by reranker relevance over daily actions. Returns the input
/// unchanged with `degraded = true` if the reranker fails or breaks its
/// contract.
pub fn rerank_candidates(
    reranker: &dyn Reranker,
    wish: &str,
    candidates: Vec<SearchResult>,
) -> (Vec<SearchResult>, bool) {
    if candidates.is_empty() {
        return (candidates, false);
    }
    let docs: Vec<String> = candidates.iter().map(|c| c.challenge.daily_action.clone()).collect();
    let ranked = reranker
        .rerank(wish, &docs)
        .and_then(|r| check_rerank_output(docs.len(), &r).map(|()| r));
    match ranked {
        Ok(ranked) => {
            let mut slots: Vec<Option<SearchResult>> = candidates.into_iter().map(Some).collect();
            let out = ranked
                .into_iter()
                .map(|(i, score)| {
                    let mut c = slots[i].take().expect("permutation checked");
                    c.rerank_score = Some(score);
                    c
                })
                .collect();
            (out, false)
        }
        Err(e) => {
            tracing::warn!(error = %e, "rerank failed, keeping retrieval order");
            (candidates, true)
        }
    }
}

/// One judge call over the first [`VALIDATION_DEPTH`] candidates; keeps
/// those judged relevant, in order. Candidates past the depth are not
/// examined and are dropped. On judge failure the input is returned
/// unfiltered with `degraded = true`.
pub fn validate_candidates(
    judge: &dyn Judge,
    wish: &str,
    candidates: Vec<SearchResult>,
) -> (Vec<SearchResult>, bool) {
    if candidates.is_empty() {
        return (candidates, false);
    }
    let depth = candidates.len().min(VALIDATION_DEPTH);
    let listing = json!(candidates[..depth]
        .iter()
        .map(|c| json!({"title": c.challenge.title, "daily_action": c.challenge.daily_action}))
        .collect::<Vec<_>>());
    let request = JudgeRequest::new(VALIDATE_RESULTS, SchemaId::RelevanceList)
        .bind("wish", wish)
        .bind("candidates", listing.to_string());
    let verdicts: Result<Vec<bool>, String> = judge
        .judge_json(&request)
        .map_err(|e| e.to_string())
        .and_then(|r| serde_json::from_value(r.value).map_err(|e| e.to_string()))
        .and_then(|v: Vec<bool>| {
            if v.len() == depth {
                Ok(v)
            } else {
                Err(format!("judge returned {} verdicts for {depth} candidates", v.len()))
            }
        });
    match verdicts {
        Ok(verdicts) => {
            let kept = candidates
                .into_iter()
                .zip(verdicts)
                .filter(|(_, keep)| *keep)
                .map(|(mut c, _)| {
                    c.validated = true;
                    c
                })
                .collect();
            (kept, false)
        }
        Err(e) => {
            tracing::warn!(error = %e, "validation failed, returning unfiltered candidates");
            (candidates, true)
        }
    }
}

/// Owns the immutable store and the providers; reentrant.
#[derive(Debug, Clone)]
pub struct Searcher {
    store: Arc<ChallengeStore>,
    providers: Providers,
}

impl Searcher {
    /// Fails if the store's vectors came from a different embedding setup.
    pub fn new(store: Arc<ChallengeStore>, providers: Providers) -> Result<Self, SearchError> {
        store.check_provider(&providers.embedder.provider_tag())?;
        Ok(Self { store, providers })
    }

    pub fn store(&self) -> &ChallengeStore {
        &self.store
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    pub fn search(&self, request: &SearchRequest) -> Result<SearchResponse, SearchError> {
        request.check()?;
        let p = &self.providers;
        let candidates = retrieve(&self.store, p.embedder.as_ref(), &request.wish, request.retrieve_k)?;
        let (candidates, rerank_degraded) = rerank_candidates(p.reranker.as_ref(), &request.wish, candidates);
        let (mut results, validate_degraded) = if request.validate {
            validate_candidates(p.judge.as_ref(), &request.wish, candidates)
        } else {
            (candidates, false)
        };
        results.truncate(request.k);
        for (i, r) in results.iter_mut().enumerate() {
            r.rank = i + 1;
        }
        Ok(SearchResponse {
            query: request.wish.clone(),
            degraded: rerank_degraded || validate_degraded,
            results,
        })
    }
}
