use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::mock::{CosineReranker, HashEmbedder, MockJudge, MockJudgeTable, DEFAULT_MOCK_DIM};
use super::remote::{ChatCompletion, HttpEndpoint, RemoteEmbedder, RemoteReranker, StructuredJudge};
use super::{FanOut, PromptRegistry, ProviderError, Providers, Result, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    pub model: String,
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl ModelEndpoint {
    fn new(model: &str, base_url: &str, api_key_env: &str) -> Self {
        Self {
            model: model.into(),
            base_url: base_url.into(),
            api_key_env: api_key_env.into(),
        }
    }

    fn connect(&self, retry: RetryPolicy, timeout: Duration) -> Result<HttpEndpoint> {
        HttpEndpoint::new(
            &self.base_url,
            &self.model,
            std::env::var(&self.api_key_env).ok(),
            retry,
            timeout,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSettings {
    pub seed: u64,
    pub dim: usize,
    /// Lookup table file for the mock judge. Absent means built-in defaults
    /// for every key.
    pub judge_table: Option<PathBuf>,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: DEFAULT_MOCK_DIM,
            judge_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub embedding: ModelEndpoint,
    pub judge: ModelEndpoint,
    pub rerank: ModelEndpoint,
    pub mock: MockSettings,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Remote,
            embedding: ModelEndpoint::new(
                "text-embedding-3-large",
                "https://api.openai.com/v1",
                "EMBED_API_KEY",
            ),
            judge: ModelEndpoint::new(
                "gemini-2.0-flash",
                "https://generativelanguage.googleapis.com/v1beta/openai",
                "JUDGE_API_KEY",
            ),
            rerank: ModelEndpoint::new(
                "bge-reranker-v2-m3",
                "https://api.jina.ai/v1",
                "RERANK_API_KEY",
            ),
            mock: MockSettings::default(),
            retry: RetryPolicy::default(),
            max_in_flight: FanOut::default().max_in_flight,
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    pub fn mock(seed: u64) -> Self {
        Self {
            mode: ProviderMode::Mock,
            mock: MockSettings {
                seed,
                ..MockSettings::default()
            },
            ..Self::default()
        }
    }

    /// Builds the providers. In mock mode the judge table is read from
    /// `mock.judge_table`, resolved against `base_dir` when relative.
    pub fn build(&self, base_dir: &std::path::Path) -> Result<Providers> {
        let fan_out = FanOut::new(self.max_in_flight);
        match self.mode {
            ProviderMode::Mock => {
                let table = match &self.mock.judge_table {
                    Some(path) => load_judge_table(&base_dir.join(path))?,
                    None => MockJudgeTable::default(),
                };
                Ok(Providers {
                    embedder: Arc::new(HashEmbedder::with_dim(self.mock.dim, self.mock.seed)),
                    judge: Arc::new(MockJudge::new(table)),
                    reranker: Arc::new(CosineReranker::new(self.mock.seed)),
                    fan_out,
                })
            }
            ProviderMode::Remote => {
                let timeout = Duration::from_secs(self.timeout_secs.max(1));
                let embed = self.embedding.connect(self.retry, timeout)?;
                let judge = self.judge.connect(self.retry, timeout)?;
                let rerank = self.rerank.connect(self.retry, timeout)?;
                Ok(Providers {
                    embedder: Arc::new(RemoteEmbedder::new(embed, fan_out)),
                    judge: Arc::new(StructuredJudge::new(
                        ChatCompletion::new(judge),
                        PromptRegistry::default(),
                    )),
                    reranker: Arc::new(RemoteReranker::new(rerank)),
                    fan_out,
                })
            }
        }
    }
}

pub fn load_judge_table(path: &std::path::Path) -> Result<MockJudgeTable> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ProviderError::ProviderUnavailable(format!("cannot read {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        ProviderError::InvalidResponse(format!("bad mock judge table {}: {e}", path.display()))
    })
}
