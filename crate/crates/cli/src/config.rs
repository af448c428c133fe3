//! The pipeline config file: one JSON document, every key optional, plus
//! `--set key=value` overrides applied before parsing.

use std::path::{Path, PathBuf};

use forge_core::collect::DEFAULT_KEEP_THRESHOLD;
use forge_core::dedup::DedupConfig;
use forge_core::eval::EvalConfig;
use forge_core::providers::ProviderConfig;
use forge_core::search::{SearchRequest, DEFAULT_K, DEFAULT_RETRIEVE_K};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// SERP result files, read in order.
    pub serp: Vec<PathBuf>,
    /// `{url, html}` JSONL served instead of live fetching.
    pub pages: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    /// Stage artifacts and the run manifest.
    pub work_dir: PathBuf,
    /// Defaults to `<work_dir>/store.forge`.
    pub store: Option<PathBuf>,
    /// Defaults to `<work_dir>/reports`.
    pub reports: Option<PathBuf>,
    /// Static UI bundle for `serve`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            serp: Vec::new(),
            pages: None,
            stopwords: None,
            blocklist: None,
            queries: None,
            work_dir: PathBuf::from("out"),
            store: None,
            reports: None,
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSettings {
    pub keep_threshold: u8,
    pub fetch_timeout_secs: u64,
}

impl Default for CollectSettings {
    fn default() -> Self {
        Self {
            keep_threshold: DEFAULT_KEEP_THRESHOLD,
            fetch_timeout_secs: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub k: usize,
    pub retrieve_k: usize,
    pub validate: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            retrieve_k: DEFAULT_RETRIEVE_K,
            validate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub host: String,
    pub port: u16,
}

impl Default for ServeSettings {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    pub sample_size: usize,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            sample_size: forge_core::eval::audit::DEFAULT_SAMPLE_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives audit sampling and the MinHash permutations.
    pub seed: u64,
    pub providers: ProviderConfig,
    pub paths: Paths,
    pub collect: CollectSettings,
    pub dedup: DedupConfig,
    pub search: SearchSettings,
    pub serve: ServeSettings,
    pub eval: EvalConfig,
    pub audit: AuditSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            providers: ProviderConfig::default(),
            paths: Paths::default(),
            collect: CollectSettings::default(),
            dedup: DedupConfig::default(),
            search: SearchSettings::default(),
            serve: ServeSettings::default(),
            eval: EvalConfig::default(),
            audit: AuditSettings::default(),
        }
    }
}

/// A parsed config plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
    /// Hex SHA-256 of the effective config's canonical JSON.
    pub hash: String,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn work_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.work_dir)
    }

    pub fn store_path(&self) -> PathBuf {
        match &self.config.paths.store {
            Some(p) => self.resolve(p),
            None => self.work_dir().join("store.forge"),
        }
    }

    pub fn reports_dir(&self) -> PathBuf {
        match &self.config.paths.reports {
            Some(p) => self.resolve(p),
            None => self.work_dir().join("reports"),
        }
    }

    /// `path` relative to the config directory with `/` separators, for
    /// manifests that must not depend on where the run happened.
    pub fn display(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.base_dir).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn search_request(&self, wish: &str) -> SearchRequest {
        let s = self.config.search;
        SearchRequest {
            wish: wish.to_string(),
            k: s.k,
            retrieve_k: s.retrieve_k,
            validate: s.validate,
        }
    }
}

/// Sets `dotted.key` in a JSON object tree, creating objects on the way.
/// The value is parsed as JSON when it parses, otherwise kept as a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}` walks into a non-object")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{key}` walks into a non-object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reads `path` (or starts from defaults when `None`), applies overrides in
/// order, and validates.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let (mut value, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir })
        }
        None => (Value::Object(Default::default()), PathBuf::from(".")),
    };
    if !value.is_object() {
        return Err(CliError::Config("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: PipelineConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    check(&config)?;
    let hash = forge_core::sha256_hex(&serde_json::to_vec(&config).expect("config serializes"));
    Ok(LoadedConfig {
        config,
        base_dir,
        hash,
    })
}

fn check(config: &PipelineConfig) -> Result<(), CliError> {
    config.dedup.check().map_err(|e| CliError::Config(e.to_string()))?;
    if config.collect.keep_threshold > 10 {
        return Err(CliError::Config("collect.keep_threshold must be in 0..=10".into()));
    }
    let probe = SearchRequest {
        wish: "probe".into(),
        k: config.search.k,
        retrieve_k: config.search.retrieve_k,
        validate: config.search.validate,
    };
    probe.check().map_err(|e| CliError::Config(e.to_string()))?;
    if config.search.k > forge_core::search::MAX_K {
        return Err(CliError::Config(format!("search.k must be at most {}", forge_core::search::MAX_K)));
    }
    Ok(())
}
