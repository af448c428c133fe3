//! Deterministic in-process providers.
//!
//! * [`HashEmbedder`]: bag of hashed tokens, L2-normalized. Texts that share
//!   most tokens get a high cosine, unrelated texts a low one.
//! * [`MockJudge`]: answers from lookup tables keyed per template, with a
//!   default answer for unlisted keys.
//! * [`CosineReranker`]: scores candidates by cosine of their hash
//!   embeddings against the query.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::{self, PromptRegistry};
use super::{
    sort_scored, Embedder, EmbeddingVector, Judge, JudgeRequest, JudgeResponse, ProviderError,
    Reranker, Result,
};

pub const DEFAULT_MOCK_DIM: usize = 64;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Lowercased alphanumeric runs.
pub fn hash_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
    failing: AtomicBool,
    calls: AtomicU64,
}

impl HashEmbedder {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(DEFAULT_MOCK_DIM, seed)
    }

    pub fn with_dim(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            seed,
            failing: AtomicBool::new(false),
            calls: AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Makes every subsequent call fail with `ProviderUnavailable`.
    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(self.seed, token.as_bytes()) % self.dim as u64) as usize
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        let mut any = false;
        for token in hash_tokens(text) {
            counts[self.bucket(&token)] += 1.0;
            any = true;
        }
        if !any {
            // No alphanumeric token: fall back to the whole string so the
            // vector is still well defined and deterministic.
            counts[self.bucket(text)] += 1.0;
        }
        EmbeddingVector::normalized(&counts).expect("at least one bucket is nonzero")
    }
}

impl Embedder for HashEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if self.failing.load(Ordering::SeqCst) {
            return Err(ProviderError::ProviderUnavailable(
                "mock embedder set to fail".into(),
            ));
        }
        if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
            return Err(ProviderError::EmptyInput);
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn provider_tag(&self) -> String {
        format!("mock-hash:dim={}:seed={}", self.dim, self.seed)
    }
}

/// Answers for one template.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    /// Answer for keys not in `entries`. Falls back to the template's
    /// built-in default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default)]
    pub entries: BTreeMap<String, Value>,
    /// Keys whose lookup fails with `ProviderUnavailable`.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub fail: BTreeSet<String>,
}

/// Lookup tables for every template, keyed by template id. This is also the
/// on-disk format of the mock judge file.
///
/// Keys per template:
/// * `page_filter`, `extract_challenges`: the page URL.
/// * `pair_match`: the two daily actions, sorted, joined by `" || "`.
/// * `validate_results`: per candidate, `wish || daily_action`; the value is
///   a boolean and the response is the array of per-candidate answers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockJudgeTable {
    pub tables: BTreeMap<String, LookupTable>,
}

pub const KEY_SEPARATOR: &str = " || ";

pub fn pair_key(a_action: &str, b_action: &str) -> String {
    if a_action <= b_action {
        format!("{a_action}{KEY_SEPARATOR}{b_action}")
    } else {
        format!("{b_action}{KEY_SEPARATOR}{a_action}")
    }
}

pub fn validation_key(wish: &str, daily_action: &str) -> String {
    format!("{wish}{KEY_SEPARATOR}{daily_action}")
}

impl MockJudgeTable {
    pub fn table_mut(&mut self, template: &str) -> &mut LookupTable {
        self.tables.entry(template.to_string()).or_default()
    }

    pub fn set_score(&mut self, url: &str, score: u8) -> &mut Self {
        self.table_mut(prompts::PAGE_FILTER)
            .entries
            .insert(url.to_string(), json!({ "score": score }));
        self
    }

    pub fn set_extraction(&mut self, url: &str, items: Value) -> &mut Self {
        self.table_mut(prompts::EXTRACT_CHALLENGES)
            .entries
            .insert(url.to_string(), items);
        self
    }

    pub fn set_duplicate(&mut self, a_action: &str, b_action: &str, duplicate: bool) -> &mut Self {
        self.table_mut(prompts::PAIR_MATCH)
            .entries
            .insert(pair_key(a_action, b_action), json!({ "duplicate": duplicate }));
        self
    }

    pub fn set_relevant(&mut self, wish: &str, daily_action: &str, relevant: bool) -> &mut Self {
        self.table_mut(prompts::VALIDATE_RESULTS)
            .entries
            .insert(validation_key(wish, daily_action), Value::Bool(relevant));
        self
    }

    pub fn fail_key(&mut self, template: &str, key: impl Into<String>) -> &mut Self {
        self.table_mut(template).fail.insert(key.into());
        self
    }
}

fn builtin_default(template: &str) -> Value {
    match template {
        prompts::PAGE_FILTER => json!({ "score": 0 }),
        prompts::EXTRACT_CHALLENGES => json!([]),
        prompts::PAIR_MATCH => json!({ "duplicate": false }),
        prompts::VALIDATE_RESULTS => Value::Bool(true),
        _ => Value::Null,
    }
}

#[derive(Debug, Deserialize)]
struct CandidateBinding {
    #[serde(default)]
    daily_action: String,
}

#[derive(Debug)]
pub struct MockJudge {
    registry: PromptRegistry,
    table: MockJudgeTable,
    failing: AtomicBool,
    calls: AtomicU64,
}

impl MockJudge {
    pub fn new(table: MockJudgeTable) -> Self {
        Self::with_registry(table, PromptRegistry::default())
    }

    pub fn with_registry(table: MockJudgeTable, registry: PromptRegistry) -> Self {
        Self {
            registry,
            table,
            failing: AtomicBool::new(false),
            calls: AtomicU64::new(0),
        }
    }

    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn table(&self) -> &MockJudgeTable {
        &self.table
    }

    fn lookup(&self, template: &str, key: &str) -> Result<Value> {
        let table = self.table.tables.get(template);
        if table.is_some_and(|t| t.fail.contains(key)) {
            return Err(ProviderError::ProviderUnavailable(format!(
                "mock judge configured to fail for `{key}`"
            )));
        }
        Ok(table
            .and_then(|t| t.entries.get(key).or(t.default.as_ref()))
            .cloned()
            .unwrap_or_else(|| builtin_default(template)))
    }

    fn binding<'a>(&self, request: &'a JudgeRequest, name: &str) -> &'a str {
        request.bindings.get(name).map(String::as_str).unwrap_or("")
    }

    fn answer(&self, request: &JudgeRequest) -> Result<Value> {
        let template = request.template.as_str();
        match template {
            prompts::PAGE_FILTER | prompts::EXTRACT_CHALLENGES => {
                self.lookup(template, self.binding(request, "url"))
            }
            prompts::PAIR_MATCH => self.lookup(
                template,
                &pair_key(
                    self.binding(request, "a_action"),
                    self.binding(request, "b_action"),
                ),
            ),
            prompts::VALIDATE_RESULTS => {
                let wish = self.binding(request, "wish");
                let candidates: Vec<CandidateBinding> =
                    serde_json::from_str(self.binding(request, "candidates")).map_err(|e| {
                        ProviderError::InvalidResponse(format!("bad candidates binding: {e}"))
                    })?;
                candidates
                    .iter()
                    .map(|c| self.lookup(template, &validation_key(wish, &c.daily_action)))
                    .collect::<Result<Vec<_>>>()
                    .map(Value::Array)
            }
            other => self.lookup(other, ""),
        }
    }
}

impl Judge for MockJudge {
    fn judge_json(&self, request: &JudgeRequest) -> Result<JudgeResponse> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        // Rendering checks the template is registered and the bindings are
        // complete, exactly as a remote call would.
        self.registry.render(request)?;
        if self.failing.load(Ordering::SeqCst) {
            return Err(ProviderError::ProviderUnavailable(
                "mock judge set to fail".into(),
            ));
        }
        let value = self.answer(request)?;
        request
            .schema
            .check(&value)
            .map_err(|detail| ProviderError::SchemaViolation {
                template: request.template.clone(),
                schema: request.schema,
                detail,
            })?;
        Ok(JudgeResponse {
            raw: value.to_string(),
            value,
        })
    }
}

/// Reranks by cosine between hash embeddings of the query and candidates.
#[derive(Debug)]
pub struct CosineReranker {
    embedder: HashEmbedder,
    failing: AtomicBool,
}

impl CosineReranker {
    pub fn new(seed: u64) -> Self {
        Self {
            embedder: HashEmbedder::new(seed),
            failing: AtomicBool::new(false),
        }
    }

    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }
}

impl Reranker for CosineReranker {
    fn rerank(&self, query: &str, candidates: &[String]) -> Result<Vec<(usize, f64)>> {
        if self.failing.load(Ordering::SeqCst) {
            return Err(ProviderError::ProviderUnavailable(
                "mock reranker set to fail".into(),
            ));
        }
        if candidates.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let q = self.embedder.embed_one(query);
        let mut scored: Vec<(usize, f64)> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, super::dot(q.values(), self.embedder.embed_one(c).values())))
            .collect();
        sort_scored(&mut scored);
        Ok(scored)
    }
}
