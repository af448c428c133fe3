//! Structured challenge extraction from filtered page text.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    validate_challenge, Challenge, ChallengeDraft, CreatedFrom, IdAllocator, PageDocument,
    RawRecord, ValidationError,
};
use crate::providers::prompts::EXTRACT_CHALLENGES;
use crate::providers::{FanOut, Judge, JudgeRequest, ProviderError, SchemaId};

/// Upper bound on items taken from one page.
pub const MAX_ITEMS_PER_PAGE: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejected {
    pub item: RawRecord,
    pub violations: Vec<ValidationError>,
}

/// Judge output for one page, before ids are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageExtraction {
    pub raw_items: Vec<RawRecord>,
    pub drafts: Vec<ChallengeDraft>,
    pub rejected: Vec<Rejected>,
    /// Items beyond [`MAX_ITEMS_PER_PAGE`] that were discarded.
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionBatch {
    pub page_url: String,
    pub raw_items: Vec<RawRecord>,
    pub accepted: Vec<Challenge>,
    pub rejected: Vec<Rejected>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub pages: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub zero_yield: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionOutcome {
    pub challenges: Vec<Challenge>,
    pub batches: Vec<ExtractionBatch>,
    pub report: ExtractionReport,
}

fn to_raw_record(item: &Value, page_url: &str) -> RawRecord {
    let mut record: RawRecord = item
        .as_object()
        .map(|obj| {
            obj.iter()
                .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
                .collect()
        })
        .unwrap_or_default();
    // Provenance always comes from the page, never from the model.
    record.remove("source_url");
    record.insert("url".into(), page_url.to_string());
    record
}

/// One judge call for `doc`, with each returned item validated.
pub fn extract_page(doc: &PageDocument, judge: &dyn Judge) -> Result<PageExtraction, ProviderError> {
    let request = JudgeRequest::new(EXTRACT_CHALLENGES, SchemaId::ChallengeList)
        .bind("url", doc.url.as_str())
        .bind("text", doc.text.as_str());
    let reply = judge.judge_json(&request)?;
    let items = reply
        .value
        .as_array()
        .ok_or_else(|| ProviderError::InvalidResponse("extraction reply is not a list".into()))?;
    let truncated = items.len().saturating_sub(MAX_ITEMS_PER_PAGE);
    let mut out = PageExtraction {
        raw_items: Vec::new(),
        drafts: Vec::new(),
        rejected: Vec::new(),
        truncated,
    };
    for item in items.iter().take(MAX_ITEMS_PER_PAGE) {
        let record = to_raw_record(item, &doc.url);
        match validate_challenge(&record) {
            Ok(draft) => out.drafts.push(draft),
            Err(violations) => out.rejected.push(Rejected {
                item: record.clone(),
                violations,
            }),
        }
        out.raw_items.push(record);
    }
    Ok(out)
}

/// Extracts from every page with bounded parallelism. A failed page is
/// retried once; ids are assigned afterwards in page order, so they do not
/// depend on scheduling.
pub fn extract_all(
    docs: &[PageDocument],
    judge: &dyn Judge,
    fan_out: FanOut,
    ids: &mut IdAllocator,
) -> ExtractionOutcome {
    let results = fan_out.map(docs, |doc| {
        extract_page(doc, judge).or_else(|first| {
            tracing::warn!(url = %doc.url, error = %first, "extraction failed, retrying once");
            extract_page(doc, judge)
        })
    });
    let mut out = ExtractionOutcome {
        report: ExtractionReport {
            pages: docs.len(),
            ..ExtractionReport::default()
        },
        ..ExtractionOutcome::default()
    };
    for (doc, result) in docs.iter().zip(results) {
        let page = match result {
            Ok(page) => page,
            Err(e) => {
                tracing::warn!(url = %doc.url, error = %e, "page extraction failed");
                out.report.failed += 1;
                continue;
            }
        };
        if page.truncated > 0 {
            tracing::warn!(url = %doc.url, dropped = page.truncated, "item cap reached");
        }
        let accepted: Vec<Challenge> = page
            .drafts
            .into_iter()
            .map(|d| d.into_challenge(ids.allocate(), CreatedFrom::Extracted))
            .collect();
        if accepted.is_empty() {
            out.report.zero_yield += 1;
        }
        out.report.accepted += accepted.len();
        out.report.rejected += page.rejected.len();
        out.challenges.extend(accepted.iter().cloned());
        out.batches.push(ExtractionBatch {
            page_url: doc.url.clone(),
            raw_items: page.raw_items,
            accepted,
            rejected: page.rejected,
        });
    }
    out
}
