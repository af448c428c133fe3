//! HTTP-backed providers.
//!
//! Wire formats follow the widely implemented OpenAI-style endpoints:
//! `POST {base}/embeddings`, `POST {base}/chat/completions`, and a
//! `POST {base}/rerank` accepting `{model, query, documents}` and returning
//! either `results[].relevance_score` or `data[].score`.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use super::prompts::{parse_model_json, reformat_prompt, PromptRegistry};
use super::retry::AttemptError;
use super::{
    check_rerank_output, sort_scored, Embedder, EmbeddingVector, FanOut, Judge, JudgeRequest,
    JudgeResponse, ProviderError, Reranker, Result, RetryPolicy,
};

const EMBED_BATCH: usize = 96;

/// Connection details shared by the three HTTP providers.
#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    client: Client,
}

impl HttpEndpoint {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
        timeout: Duration,
    ) -> Result<Self> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::ProviderUnavailable(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            retry,
            client,
        })
    }

    fn post_json(&self, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}/{}", self.base_url, path);
        self.retry
            .run(|_| {
                let mut req = self.client.post(&url).json(body);
                if let Some(key) = &self.api_key {
                    req = req.bearer_auth(key);
                }
                let resp = req
                    .send()
                    .map_err(|e| AttemptError::Transient(e.to_string()))?;
                let status = resp.status();
                if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                    return Err(AttemptError::Transient(format!("{url}: HTTP {status}")));
                }
                if !status.is_success() {
                    return Err(AttemptError::Permanent(format!("{url}: HTTP {status}")));
                }
                resp.json::<Value>()
                    .map_err(|e| AttemptError::Transient(format!("{url}: {e}")))
            })
            .map_err(ProviderError::ProviderUnavailable)
    }
}

#[derive(Debug)]
pub struct RemoteEmbedder {
    endpoint: HttpEndpoint,
    fan_out: FanOut,
}

#[derive(Deserialize)]
struct EmbeddingData {
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingReply {
    data: Vec<EmbeddingData>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: HttpEndpoint, fan_out: FanOut) -> Self {
        Self { endpoint, fan_out }
    }

    fn embed_chunk(&self, chunk: &[String]) -> Result<Vec<EmbeddingVector>> {
        let reply = self.endpoint.post_json(
            "embeddings",
            &json!({ "model": self.endpoint.model, "input": chunk }),
        )?;
        let mut reply: EmbeddingReply = serde_json::from_value(reply)
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        if reply.data.len() != chunk.len() {
            return Err(ProviderError::InvalidResponse(format!(
                "expected {} embeddings, got {}",
                chunk.len(),
                reply.data.len()
            )));
        }
        reply.data.sort_by_key(|d| d.index);
        reply
            .data
            .iter()
            .map(|d| EmbeddingVector::normalized(&d.embedding))
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
            return Err(ProviderError::EmptyInput);
        }
        let chunks: Vec<&[String]> = texts.chunks(EMBED_BATCH).collect();
        let results = self.fan_out.map(&chunks, |c| self.embed_chunk(c));
        let mut out = Vec::with_capacity(texts.len());
        let mut dim = None;
        for chunk in results {
            for v in chunk? {
                let expected = *dim.get_or_insert(v.dim());
                if v.dim() != expected {
                    return Err(ProviderError::DimensionMismatch {
                        expected,
                        actual: v.dim(),
                    });
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    fn provider_tag(&self) -> String {
        format!("remote:{}", self.endpoint.model)
    }
}

/// Plain text completion: prompt in, model text out.
pub trait Completion: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Debug)]
pub struct ChatCompletion {
    endpoint: HttpEndpoint,
}

impl ChatCompletion {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

impl Completion for ChatCompletion {
    fn complete(&self, prompt: &str) -> Result<String> {
        let reply = self.endpoint.post_json(
            "chat/completions",
            &json!({
                "model": self.endpoint.model,
                "temperature": 0,
                "messages": [{ "role": "user", "content": prompt }],
            }),
        )?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::InvalidResponse("no message content in reply".into()))
    }
}

/// Turns a [`Completion`] into a [`Judge`]: renders the template, parses and
/// schema-checks the answer, and asks once for a reformat when the first
/// answer does not conform.
#[derive(Debug)]
pub struct StructuredJudge<C> {
    completion: C,
    registry: PromptRegistry,
}

impl<C: Completion> StructuredJudge<C> {
    pub fn new(completion: C, registry: PromptRegistry) -> Self {
        Self {
            completion,
            registry,
        }
    }
}

fn conforming(raw: &str, request: &JudgeRequest) -> std::result::Result<Value, String> {
    let value = parse_model_json(raw)?;
    request.schema.check(&value)?;
    Ok(value)
}

impl<C: Completion> Judge for StructuredJudge<C> {
    fn judge_json(&self, request: &JudgeRequest) -> Result<JudgeResponse> {
        let prompt = self.registry.render(request)?;
        let raw = self.completion.complete(&prompt)?;
        let problem = match conforming(&raw, request) {
            Ok(value) => return Ok(JudgeResponse { value, raw }),
            Err(problem) => problem,
        };
        tracing::debug!(template = %request.template, %problem, "asking for reformat");
        let retry_raw = self
            .completion
            .complete(&reformat_prompt(request.schema, &raw, &problem))?;
        conforming(&retry_raw, request)
            .map(|value| JudgeResponse {
                value,
                raw: retry_raw,
            })
            .map_err(|detail| ProviderError::SchemaViolation {
                template: request.template.clone(),
                schema: request.schema,
                detail,
            })
    }
}

#[derive(Debug)]
pub struct RemoteReranker {
    endpoint: HttpEndpoint,
}

impl RemoteReranker {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

fn parse_rerank_reply(reply: &Value) -> Result<Vec<(usize, f64)>> {
    let rows = reply
        .get("results")
        .or_else(|| reply.get("data"))
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::InvalidResponse("no results array".into()))?;
    rows.iter()
        .map(|row| {
            let index = row.get("index").and_then(Value::as_u64);
            let score = row
                .get("relevance_score")
                .or_else(|| row.get("score"))
                .and_then(Value::as_f64);
            match (index, score) {
                (Some(i), Some(s)) => Ok((i as usize, s)),
                _ => Err(ProviderError::InvalidResponse(format!(
                    "malformed rerank row: {row}"
                ))),
            }
        })
        .collect()
}

impl Reranker for RemoteReranker {
    fn rerank(&self, query: &str, candidates: &[String]) -> Result<Vec<(usize, f64)>> {
        if candidates.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        let reply = self.endpoint.post_json(
            "rerank",
            &json!({
                "model": self.endpoint.model,
                "query": query,
                "documents": candidates,
                "top_n": candidates.len(),
                "return_documents": false,
            }),
        )?;
        let mut ranked = parse_rerank_reply(&reply)?;
        sort_scored(&mut ranked);
        check_rerank_output(candidates.len(), &ranked)?;
        Ok(ranked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::prompts::PAIR_MATCH;
    use crate::providers::SchemaId;
    use std::sync::Mutex;

    struct Scripted(Mutex<Vec<String>>);

    impl Completion for Scripted {
        fn complete(&self, _prompt: &str) -> Result<String> {
            let mut q = self.0.lock().unwrap();
            if q.is_empty() {
                return Err(ProviderError::ProviderUnavailable("script exhausted".into()));
            }
            Ok(q.remove(0))
        }
    }

    fn judge(replies: &[&str]) -> StructuredJudge<Scripted> {
        StructuredJudge::new(
            Scripted(Mutex::new(replies.iter().map(|s| s.to_string()).collect())),
            PromptRegistry::default(),
        )
    }

    fn pair_request() -> JudgeRequest {
        JudgeRequest::new(PAIR_MATCH, SchemaId::DuplicateVerdict)
            .bind("a_title", "a")
            .bind("a_action", "cooking a new meal every day")
            .bind("b_title", "b")
            .bind("b_action", "trying a new recipe every day")
    }

    #[test]
    fn conforming_answer_is_accepted() {
        let out = judge(&["{\"duplicate\": true}"]).judge_json(&pair_request()).unwrap();
        assert_eq!(out.value, json!({"duplicate": true}));
    }

    #[test]
    fn one_reformat_retry() {
        let out = judge(&["They look like duplicates.", "{\"duplicate\": true}"])
            .judge_json(&pair_request())
            .unwrap();
        assert_eq!(out.value, json!({"duplicate": true}));
    }

    #[test]
    fn prose_twice_is_a_schema_violation() {
        let err = judge(&["They look like duplicates.", "Yes, duplicates."])
            .judge_json(&pair_request())
            .unwrap_err();
        assert!(matches!(err, ProviderError::SchemaViolation { .. }));
    }

    #[test]
    fn rerank_reply_formats() {
        let cohere = json!({"results": [{"index": 1, "relevance_score": 0.9}, {"index": 0, "relevance_score": 0.2}]});
        let pinecone = json!({"data": [{"index": 0, "score": 0.3}, {"index": 1, "score": 0.4}]});
        assert_eq!(parse_rerank_reply(&cohere).unwrap(), vec![(1, 0.9), (0, 0.2)]);
        assert_eq!(parse_rerank_reply(&pinecone).unwrap(), vec![(0, 0.3), (1, 0.4)]);
        assert!(parse_rerank_reply(&json!({"x": 1})).is_err());
    }
}
