//! Interfaces to the external model services (embedding, structured
//! judgment, reranking) and the deterministic in-process mocks used in tests
//! and `mock` mode.
//!
//! Every provider is `Send + Sync`. Fan-out over many inputs goes through
//! [`FanOut`], which bounds the number of in-flight calls and returns results
//! in input order, so callers stay sequential-looking.

mod config;
pub mod mock;
mod pool;
pub mod prompts;
pub mod remote;
mod retry;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ModelEndpoint, MockSettings, ProviderConfig, ProviderMode};
pub use pool::FanOut;
pub use prompts::{PromptRegistry, SchemaId, Template};
pub use retry::RetryPolicy;

pub type Result<T, E = ProviderError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("empty input")]
    EmptyInput,
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("response for template `{template}` violates schema {schema:?}: {detail}")]
    SchemaViolation {
        template: String,
        schema: SchemaId,
        detail: String,
    },
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` is missing binding `{name}`")]
    MissingBinding { template: String, name: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
}

/// Tolerance on the L2 norm of a normalized vector.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A dense embedding. Construct through [`EmbeddingVector::normalized`] to
/// get a unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn from_raw(values: Vec<f32>) -> Self {
        Self { values }
    }

    /// Scales `values` to unit L2 norm. Fails on the zero vector or
    /// non-finite input.
    pub fn normalized(values: &[f64]) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(ProviderError::InvalidResponse(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Self {
            values: values.iter().map(|v| (v / norm) as f32).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    /// Dot product accumulated in f64. On unit vectors this is the cosine.
    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(ProviderError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(dot(&self.values, &other.values))
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub trait Embedder: Send + Sync {
    /// One unit vector per input text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    /// Identifies the embedding configuration; vectors from different tags
    /// must never be compared.
    fn provider_tag(&self) -> String;
}

/// A templated request for a schema-conforming JSON answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template: String,
    pub bindings: BTreeMap<String, String>,
    pub schema: SchemaId,
}

impl JudgeRequest {
    pub fn new(template: impl Into<String>, schema: SchemaId) -> Self {
        Self {
            template: template.into(),
            bindings: BTreeMap::new(),
            schema,
        }
    }

    pub fn bind(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.bindings.insert(name.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub value: serde_json::Value,
    pub raw: String,
}

pub trait Judge: Send + Sync {
    fn judge_json(&self, request: &JudgeRequest) -> Result<JudgeResponse>;
}

pub trait Reranker: Send + Sync {
    /// Returns a permutation of `0..candidates.len()` with non-increasing
    /// scores.
    fn rerank(&self, query: &str, candidates: &[String]) -> Result<Vec<(usize, f64)>>;
}

/// Checks the reranker contract: a full permutation with non-increasing
/// scores.
pub fn check_rerank_output(n: usize, ranked: &[(usize, f64)]) -> Result<()> {
    if ranked.len() != n {
        return Err(ProviderError::InvalidResponse(format!(
            "rerank returned {} entries for {n} candidates",
            ranked.len()
        )));
    }
    let mut seen = vec![false; n];
    for &(idx, _) in ranked {
        if idx >= n || std::mem::replace(&mut seen[idx], true) {
            return Err(ProviderError::InvalidResponse(format!(
                "rerank index {idx} is out of range or repeated"
            )));
        }
    }
    if ranked.windows(2).any(|w| w[0].1 < w[1].1) {
        return Err(ProviderError::InvalidResponse(
            "rerank scores are not sorted".into(),
        ));
    }
    Ok(())
}

/// Sorts `(index, score)` by descending score, ascending index on ties.
pub(crate) fn sort_scored(scored: &mut [(usize, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// The three services plus the fan-out width shared by all stages.
#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<dyn Embedder>,
    pub judge: Arc<dyn Judge>,
    pub reranker: Arc<dyn Reranker>,
    pub fan_out: FanOut,
}

impl std::fmt::Debug for Providers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Providers")
            .field("embedder", &self.embedder.provider_tag())
            .field("fan_out", &self.fan_out)
            .finish_non_exhaustive()
    }
}
