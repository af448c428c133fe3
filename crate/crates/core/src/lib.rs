//! Curation and search for 30-day challenges.
//!
//! The pipeline runs in stages, each a module here:
//!
//! 1. [`collect`]: ingest search-result fixtures, drop blocked domains, fetch
//!    pages, and keep the ones the judge scores as likely to hold challenges.
//! 2. [`extract`]: ask the judge for structured challenge records per page.
//! 3. [`dedup`]: string prefilter, embedding bands, judge resolution of the
//!    ambiguous band, greedy correlation clustering.
//! 4. [`store`]: persist the corpus with its unit vectors; exact top-k.
//! 5. [`search`]: retrieve, rerank, validate.
//! 6. [`eval`]: ranking metrics and dedup audit worksheets.
//!
//! All external model calls go through [`providers`], which also ships
//! deterministic mocks so every stage runs offline.

pub mod collect;
pub mod dedup;
pub mod eval;
pub mod extract;
pub mod model;
pub mod providers;
pub mod search;
pub mod store;
pub mod testkit;

pub use model::{Challenge, CreatedFrom, PageDocument, SearchResultRecord};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`. Used for store checksums and run manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
