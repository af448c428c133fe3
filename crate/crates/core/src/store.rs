//! The indexed corpus: deduplicated challenges with their unit vectors.
//!
//! On disk a store is one file:
//!
//! ```text
//! {"format":"forge-store","version":1,...}\n      header, one JSON line
//! {"id":"c00000",...}\n ...                       challenges, JSONL
//! <count * dim little-endian f32>                 vectors, row-major
//! ```
//!
//! The header carries SHA-256 checksums of both sections. Search is an
//! exact scan.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Challenge;
use crate::providers::{dot, EmbeddingVector};
use crate::sha256_hex;

pub const FORMAT: &str = "forge-store";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported store format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch in {section} section")]
    ChecksumMismatch { section: &'static str },
    #[error("dimension mismatch: store has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("store built with `{store}` cannot be searched with `{provider}`")]
    ProviderMismatch { store: String, provider: String },
    #[error("invalid store: {0}")]
    Invalid(String),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
    count: usize,
    provider_tag: String,
    challenges_bytes: usize,
    challenges_sha256: String,
    vectors_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeStore {
    challenges: Vec<Challenge>,
    vectors: Vec<EmbeddingVector>,
    dim: usize,
    provider_tag: String,
}

impl ChallengeStore {
    /// Builds a store, sorting items by id. Every vector must have length
    /// `dim` and unit norm; ids must be unique.
    pub fn new(
        dim: usize,
        provider_tag: impl Into<String>,
        mut items: Vec<(Challenge, EmbeddingVector)>,
    ) -> Result<Self> {
        let provider_tag = provider_tag.into();
        if dim == 0 {
            return Err(StoreError::Invalid("dimension must be positive".into()));
        }
        if provider_tag.is_empty() {
            return Err(StoreError::Invalid("provider tag is empty".into()));
        }
        items.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let mut seen = HashSet::new();
        for (c, v) in &items {
            if !seen.insert(c.id.as_str()) {
                return Err(StoreError::Invalid(format!("duplicate id {}", c.id)));
            }
            if v.dim() != dim {
                return Err(StoreError::DimensionMismatch {
                    expected: dim,
                    actual: v.dim(),
                });
            }
            if !v.is_unit() {
                return Err(StoreError::Invalid(format!("vector for {} is not unit norm", c.id)));
            }
        }
        let (challenges, vectors) = items.into_iter().unzip();
        Ok(Self {
            challenges,
            vectors,
            dim,
            provider_tag,
        })
    }

    pub fn len(&self) -> usize {
        self.challenges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.challenges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    pub fn challenges(&self) -> &[Challenge] {
        &self.challenges
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn get(&self, idx: usize) -> Option<&Challenge> {
        self.challenges.get(idx)
    }

    /// Fails unless vectors from `tag` are comparable with this store's.
    pub fn check_provider(&self, tag: &str) -> Result<()> {
        if tag == self.provider_tag {
            Ok(())
        } else {
            Err(StoreError::ProviderMismatch {
                store: self.provider_tag.clone(),
                provider: tag.to_string(),
            })
        }
    }

    /// Exact top-k by dot product (cosine on unit vectors). Returns
    /// `(index, score)` pairs, scores non-increasing, ties by ascending id.
    pub fn topk_indices(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(usize, f64)>> {
        if query.dim() != self.dim {
            return Err(StoreError::DimensionMismatch {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(query.values(), v.values())))
            .collect();
        // Items are id-sorted, so ascending index is ascending id.
        let by_score = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        let k = k.min(scored.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_score);
            scored.truncate(k);
        }
        scored.sort_by(by_score);
        Ok(scored)
    }

    /// [`Self::topk_indices`] with ids.
    pub fn topk(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(String, f64)>> {
        Ok(self
            .topk_indices(query, k)?
            .into_iter()
            .map(|(i, s)| (self.challenges[i].id.clone(), s))
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut challenges = Vec::new();
        crate::model::write_jsonl(&mut challenges, &self.challenges).expect("writing to memory");
        let mut vectors = Vec::with_capacity(self.len() * self.dim * 4);
        for v in &self.vectors {
            for x in v.values() {
                vectors.extend_from_slice(&x.to_le_bytes());
            }
        }
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            dim: self.dim,
            count: self.len(),
            provider_tag: self.provider_tag.clone(),
            challenges_bytes: challenges.len(),
            challenges_sha256: sha256_hex(&challenges),
            vectors_sha256: sha256_hex(&vectors),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&challenges);
        out.extend_from_slice(&vectors);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| StoreError::Invalid("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| StoreError::Invalid(format!("bad header: {e}")))?;
        if header.format != FORMAT {
            return Err(StoreError::Invalid(format!("not a store file: {}", header.format)));
        }
        if header.version != VERSION {
            return Err(StoreError::FormatVersionMismatch {
                found: header.version,
                expected: VERSION,
            });
        }
        let body = &bytes[nl + 1..];
        if body.len() < header.challenges_bytes {
            return Err(StoreError::ChecksumMismatch { section: "challenges" });
        }
        let (challenges_raw, vectors_raw) = body.split_at(header.challenges_bytes);
        if sha256_hex(challenges_raw) != header.challenges_sha256 {
            return Err(StoreError::ChecksumMismatch { section: "challenges" });
        }
        if sha256_hex(vectors_raw) != header.vectors_sha256 {
            return Err(StoreError::ChecksumMismatch { section: "vectors" });
        }
        let challenges: Vec<Challenge> = crate::model::read_jsonl(challenges_raw)
            .map_err(|e| StoreError::Invalid(format!("challenges section: {e}")))?;
        let expected_len = header
            .count
            .checked_mul(header.dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| StoreError::Invalid("count * dim overflows".into()))?;
        if challenges.len() != header.count || vectors_raw.len() != expected_len {
            return Err(StoreError::Invalid(format!(
                "header promises {} items of dim {}, found {} challenges and {} vector bytes",
                header.count,
                header.dim,
                challenges.len(),
                vectors_raw.len()
            )));
        }
        let vectors = vectors_raw
            .chunks_exact(4 * header.dim.max(1))
            .map(|row| {
                EmbeddingVector::from_raw(
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                        .collect(),
                )
            })
            .collect::<Vec<_>>();
        Self::new(header.dim, header.provider_tag, challenges.into_iter().zip(vectors).collect())
    }

    /// Writes the store atomically (temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
