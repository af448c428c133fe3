//! Domain records shared by every pipeline stage.
//!
//! A [`Challenge`] is the corpus atom: a wish (the goal) paired with a
//! repeatable daily action, plus the title/description lifted from the source
//! page. Records travel between stages as JSON Lines.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

/// Where a challenge record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreatedFrom {
    Extracted,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub id: String,
    pub title: String,
    pub description: String,
    pub wish: String,
    pub daily_action: String,
    pub source_url: String,
    pub created_from: CreatedFrom,
}

/// One search-engine hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultRecord {
    pub query_id: String,
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
}

/// A fetched page reduced to body text.
///
/// `title` and `snippet` are carried over from the search hit so the
/// likelihood scorer sees the same context a human skimming results would.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDocument {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
    pub text: String,
    #[serde(default)]
    pub likelihood: Option<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_raw_results: usize,
    pub n_unique_urls: usize,
    pub n_filtered_pages: usize,
    pub n_extracted: usize,
    pub n_deduped: usize,
}

impl CorpusStats {
    pub fn is_consistent(&self) -> bool {
        self.n_deduped <= self.n_extracted
            && self.n_filtered_pages <= self.n_unique_urls
            && self.n_unique_urls <= self.n_raw_results
    }
}

/// A single field-level violation found by [`validate_challenge`].
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "field", rename_all = "snake_case")]
pub enum ValidationError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{0}` is empty")]
    EmptyField(String),
    #[error("source url is not an absolute URL: {0}")]
    BadUrl(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable url: {0}")]
pub struct BadUrl(pub String);

/// Raw field map as produced by the extraction judge or a fixture file.
pub type RawRecord = BTreeMap<String, String>;

/// A validated challenge that has not been given an id yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeDraft {
    pub title: String,
    pub description: String,
    pub wish: String,
    pub daily_action: String,
    pub source_url: String,
}

impl ChallengeDraft {
    pub fn into_challenge(self, id: impl Into<String>, created_from: CreatedFrom) -> Challenge {
        Challenge {
            id: id.into(),
            title: self.title,
            description: self.description,
            wish: self.wish,
            daily_action: self.daily_action,
            source_url: self.source_url,
            created_from,
        }
    }
}

const REQUIRED_TEXT_FIELDS: [&str; 3] = ["title", "wish", "daily_action"];

/// Checks every field invariant of a raw record and reports all violations at
/// once. The source URL is read from `url` (or `source_url`) and normalized.
/// `description` may be absent or empty.
pub fn validate_challenge(record: &RawRecord) -> Result<ChallengeDraft, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let mut text = BTreeMap::new();
    for name in REQUIRED_TEXT_FIELDS {
        match record.get(name) {
            None => errors.push(ValidationError::MissingField(name.to_string())),
            Some(v) if v.trim().is_empty() => {
                errors.push(ValidationError::EmptyField(name.to_string()))
            }
            Some(v) => {
                text.insert(name, v.trim().to_string());
            }
        }
    }

    let raw_url = record.get("url").or_else(|| record.get("source_url"));
    let source_url = match raw_url {
        None => {
            errors.push(ValidationError::MissingField("url".to_string()));
            None
        }
        Some(u) => match normalize_url(u) {
            Ok(n) => Some(n),
            Err(_) => {
                errors.push(ValidationError::BadUrl(u.clone()));
                None
            }
        },
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ChallengeDraft {
        title: text.remove("title").unwrap_or_default(),
        description: record
            .get("description")
            .map(|d| d.trim().to_string())
            .unwrap_or_default(),
        wish: text.remove("wish").unwrap_or_default(),
        daily_action: text.remove("daily_action").unwrap_or_default(),
        source_url: source_url.unwrap_or_default(),
    })
}

fn is_tracking_param(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || key == "fbclid" || key == "gclid"
}

/// Canonical form used for URL uniqueness.
///
/// Lowercases scheme and host, drops default ports, fragments, trailing path
/// slashes and tracking parameters (`utm_*`, `fbclid`, `gclid`), and sorts the
/// remaining query parameters. Parameter encoding is preserved as written.
pub fn normalize_url(raw: &str) -> Result<String, BadUrl> {
    let trimmed = raw.trim();
    let url = Url::parse(trimmed).map_err(|_| BadUrl(raw.to_string()))?;
    if url.cannot_be_a_base() || url.host_str().map_or(true, str::is_empty) {
        return Err(BadUrl(raw.to_string()));
    }

    let mut out = String::with_capacity(trimmed.len());
    out.push_str(&url[..url::Position::AfterPort]);
    out.push_str(url.path().trim_end_matches('/'));

    if let Some(query) = url.query() {
        let mut params: Vec<(String, &str)> = query
            .split('&')
            .filter(|p| !p.is_empty())
            .map(|p| {
                let key = p.split('=').next().unwrap_or_default();
                let decoded: String = url::form_urlencoded::parse(key.as_bytes())
                    .next()
                    .map(|(k, _)| k.into_owned())
                    .unwrap_or_default();
                (decoded, p)
            })
            .filter(|(k, _)| !is_tracking_param(k))
            .collect();
        params.sort();
        if !params.is_empty() {
            out.push('?');
            let joined: Vec<&str> = params.iter().map(|(_, p)| *p).collect();
            out.push_str(&joined.join("&"));
        }
    }
    Ok(out)
}

/// Allocates ids of the form `c00000`, `c00001`, ...
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: usize,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: usize) -> Self {
        Self { next }
    }

    pub fn allocate(&mut self) -> String {
        let id = format_id(self.next);
        self.next += 1;
        id
    }

    pub fn issued(&self) -> usize {
        self.next
    }
}

pub fn format_id(n: usize) -> String {
    format!("c{n:05}")
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>, JsonlError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            line: idx + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

impl fmt::Display for CreatedFrom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CreatedFrom::Extracted => f.write_str("extracted"),
            CreatedFrom::Fixture => f.write_str("fixture"),
        }
    }
}
