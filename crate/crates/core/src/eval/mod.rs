//! Offline evaluation: ranking metrics over labeled wishes and worksheets
//! for auditing dedup by hand.

pub mod audit;
pub mod harness;
pub mod metrics;

pub use audit::{audit_dedup, AuditWorksheets};
pub use harness::{evaluate_search, write_reports, EvalConfig, EvalReport, LabeledQuery, RunConfig, Tier};
pub use metrics::{dedup_recall_estimate, hit_at_k, ndcg_at_k, prf_at_k, DomainError, Prf};
