use std::sync::Arc;

use forge_core::collect::{apply_blocklist, fetch_pages, filter_pages, Blocklist, FixtureFetcher};
use forge_core::dedup::{dedup_run, DedupConfig, Stopwords};
use forge_core::extract::extract_all;
use forge_core::model::{IdAllocator, SearchResultRecord};
use forge_core::providers::mock::{HashEmbedder, MockJudgeTable};
use forge_core::providers::{Embedder, FanOut};
use forge_core::search::{SearchRequest, Searcher};
use forge_core::store::{ChallengeStore, StoreError};
use forge_core::testkit::{mock_providers, planted_fixture};
use serde_json::json;

fn record(url: &str) -> SearchResultRecord {
    SearchResultRecord {
        query_id: "q01".into(),
        url: url.into(),
        title: "30 day ideas".into(),
        snippet: String::new(),
    }
}

const GOOD: &str = "https://habits.example/thirty";
const DUP: &str = "https://more.example/list";
const WEAK: &str = "https://news.example/today";

fn table() -> MockJudgeTable {
    let mut t = MockJudgeTable::default();
    t.set_score(GOOD, 9).set_score(DUP, 7).set_score(WEAK, 2);
    t.set_extraction(
        GOOD,
        json!([
            {"title": "Morning walk", "description": "Walk outside every morning before work for thirty minutes.",
             "wish": "feel more energetic", "daily_action": "walk outside for 30 minutes every morning"},
            {"title": "Read nightly", "description": "Read ten pages.",
             "wish": "read more books", "daily_action": "read ten pages before bed"}
        ]),
    );
    t.set_extraction(
        DUP,
        json!([
            {"title": "Walk daily", "description": "Short.",
             "wish": "feel more energetic", "daily_action": "Walk outside for 30 minutes every morning!"},
            {"title": "Save coins", "description": "Put spare change in a jar.",
             "wish": "save money", "daily_action": "put spare change in a jar each evening"}
        ]),
    );
    t
}

#[test]
fn pages_to_search_results() {
    let providers = mock_providers(5, table());
    let records = vec![record(GOOD), record(DUP), record(WEAK), record("https://www.pinterest.com/pin/1")];
    let kept = apply_blocklist(records, &Blocklist::builtin());
    assert_eq!(kept.len(), 3);

    let html = |body: &str| format!("<html><body><p>{body}</p><script>var x = 1;</script></body></html>");
    let fetcher = FixtureFetcher::from_pages([
        (GOOD.to_string(), html("Thirty day habits that stick")),
        (DUP.to_string(), html("More ideas for a month of change")),
        (WEAK.to_string(), html("Local weather and traffic")),
    ]);
    let (docs, report) = fetch_pages(&kept, &fetcher, FanOut::new(4));
    assert_eq!(report.fetched, 3);
    assert!(docs.iter().all(|d| !d.text.contains("var x")));

    let filtered = filter_pages(&docs, providers.judge.as_ref(), FanOut::new(4), 6);
    let urls: Vec<&str> = filtered.kept.iter().map(|d| d.url.as_str()).collect();
    assert_eq!(urls, [GOOD, DUP]);

    let extracted = extract_all(&filtered.kept, providers.judge.as_ref(), FanOut::new(4), &mut IdAllocator::new());
    assert_eq!(extracted.challenges.len(), 4);

    let dedup = dedup_run(&extracted.challenges, &providers, &Stopwords::builtin(), &DedupConfig::default()).unwrap();
    assert_eq!(dedup.deduped.len(), 3);
    assert_eq!(dedup.removed.len(), 1);
    let walk = dedup.deduped.iter().find(|c| c.title == "Morning walk").expect("longest description kept");
    assert_eq!(dedup.removed[0].kept_id, walk.id);

    let vectors = providers
        .embedder
        .embed_batch(&dedup.deduped.iter().map(|c| c.daily_action.clone()).collect::<Vec<_>>())
        .unwrap();
    let store = ChallengeStore::new(
        64,
        providers.embedder.provider_tag(),
        dedup.deduped.iter().cloned().zip(vectors).collect(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.forge");
    store.save(&path).unwrap();
    let loaded = ChallengeStore::load(&path).unwrap();
    assert_eq!(loaded, store);

    let searcher = Searcher::new(Arc::new(loaded), providers).unwrap();
    let mut request = SearchRequest::new("walk outside every morning");
    request.k = 2;
    let response = searcher.search(&request).unwrap();
    assert!(!response.degraded);
    assert_eq!(response.results[0].challenge.id, walk.id);
    assert_eq!(response.results.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2]);
}

#[test]
fn corrupted_store_is_rejected() {
    let e = HashEmbedder::new(1);
    let fx = planted_fixture(1, &e);
    let items = fx.challenges[..10].iter().map(|c| (c.clone(), e.embed_one(&c.daily_action))).collect();
    let store = ChallengeStore::new(64, e.provider_tag(), items).unwrap();
    let mut bytes = store.to_bytes();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    assert!(matches!(
        ChallengeStore::from_bytes(&bytes),
        Err(StoreError::ChecksumMismatch { section: "vectors" })
    ));
}

#[test]
fn dedup_output_does_not_depend_on_parallelism() {
    let e = HashEmbedder::new(9);
    let fx = planted_fixture(9, &e);
    let run = |fan_out: FanOut| {
        let mut providers = mock_providers(9, fx.judge.clone());
        providers.fan_out = fan_out;
        dedup_run(&fx.challenges, &providers, &Stopwords::builtin(), &DedupConfig::default()).unwrap()
    };
    let a = run(FanOut::sequential());
    let b = run(FanOut::new(8));
    assert_eq!(a.deduped, b.deduped);
    assert_eq!(a.removed, b.removed);
    assert_eq!(a.audit, b.audit);
}
