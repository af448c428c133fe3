//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Everything runs on mock providers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use forge_cli::bundle;
use forge_core::dedup::Stopwords;
use forge_core::dedup::{cluster_greedy_idx, dedup_run, score_against_groups, DedupConfig, MatchGraph, Variant};
use forge_core::eval::harness::EvalReport;
use forge_core::eval::{dedup_recall_estimate, hit_at_k, ndcg_at_k, prf_at_k, RunConfig};
use forge_core::model::{normalize_url, read_jsonl, Challenge, CreatedFrom, PageDocument, SearchResultRecord};
use forge_core::providers::mock::{CosineReranker, HashEmbedder};
use forge_core::providers::{EmbeddingVector, Judge, JudgeRequest, JudgeResponse, ProviderError};
use forge_core::search::{rerank_candidates, retrieve, validate_candidates};
use forge_core::store::ChallengeStore;
use forge_core::testkit::{chain_fixture, mock_providers, planted_fixture, Fixture};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn run_variant(fx: &Fixture, seed: u64, variant: Variant) -> (f64, f64, f64) {
    let providers = mock_providers(seed, fx.judge.clone());
    let out = dedup_run(&fx.challenges, &providers, &Stopwords::builtin(), &DedupConfig::preset(variant))
        .expect("dedup runs");
    let (p, r) = score_against_groups(&out.removed, &fx.group_of);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

const DEDUP_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn planted_dedup() -> Outcome {
    let start = Instant::now();
    let mut worst = (1.0f64, 1.0f64);
    for seed in DEDUP_SEEDS {
        let fx = planted_fixture(seed, &HashEmbedder::new(seed));
        ensure(fx.challenges.len() == 200, || format!("fixture has {} items", fx.challenges.len()))?;
        let dup_groups = {
            let mut sizes: HashMap<&str, usize> = HashMap::new();
            for g in fx.group_of.values() {
                *sizes.entry(g.as_str()).or_default() += 1;
            }
            sizes.values().filter(|&&s| s > 1).count()
        };
        ensure(dup_groups == 60, || format!("fixture plants {dup_groups} duplicate groups"))?;
        let (p, r, _) = single_threaded(|| run_variant(&fx, seed, Variant::Full));
        worst = (worst.0.min(p), worst.1.min(r));
        ensure(p >= 0.95 && r >= 0.90, || format!("seed {seed}: precision {p:.3}, recall {r:.3}"))?;
    }
    let per_run = start.elapsed() / DEDUP_SEEDS.len() as u32;
    ensure(per_run < Duration::from_secs(30), || format!("{per_run:?} per run"))?;
    Ok(format!(
        "{} seeds, worst precision {:.3}, worst recall {:.3}, {:?} per run on one thread",
        DEDUP_SEEDS.len(),
        worst.0,
        worst.1,
        per_run
    ))
}

fn ablation_ordering() -> Outcome {
    let mut lines = Vec::new();
    for seed in DEDUP_SEEDS {
        let fx = planted_fixture(seed, &HashEmbedder::new(seed));
        let full = run_variant(&fx, seed, Variant::Full).2;
        let no_judge = run_variant(&fx, seed, Variant::NoJudge).2;
        let vector = run_variant(&fx, seed, Variant::VectorTransitive).2;
        ensure(full > no_judge && full > vector, || {
            format!("seed {seed}: full {full:.3}, no-judge {no_judge:.3}, vector+transitive {vector:.3}")
        })?;
        if seed == DEDUP_SEEDS[0] {
            lines.push(format!("F1 full {full:.3} > no-judge {no_judge:.3}, vector+transitive {vector:.3}"));
        }
    }
    let chain = chain_fixture(11, &HashEmbedder::new(11));
    let (tp, _, _) = run_variant(&chain, 11, Variant::VectorTransitive);
    let (gp, _, _) = run_variant(&chain, 11, Variant::Full);
    ensure(tp < 0.5, || format!("transitive precision on chain {tp:.3}"))?;
    ensure(gp > tp, || format!("greedy precision {gp:.3} not above transitive {tp:.3}"))?;
    lines.push(format!("chain precision transitive {tp:.3}, greedy {gp:.3}"));
    Ok(lines.join("; "))
}

fn graph_of(n: usize) -> MatchGraph {
    MatchGraph::new((0..n).map(|i| format!("n{i:03}")))
}

fn check_partition(n: usize, clusters: &[Vec<usize>]) -> Result<(), String> {
    let mut seen = vec![false; n];
    for &i in clusters.iter().flatten() {
        ensure(i < n && !seen[i], || format!("node {i} placed twice or out of range"))?;
        seen[i] = true;
    }
    ensure(seen.iter().all(|&s| s), || "a node is missing".into())
}

/// Replays the insertion rule from the output: each node joined the
/// cluster with the most neighbors among those where it touches at least
/// half the members, earliest on ties, or opened a new one.
fn check_insertion(graph: &MatchGraph, clusters: &[Vec<usize>]) -> Result<(), String> {
    let mut where_is: HashMap<usize, usize> = HashMap::new();
    for (c, members) in clusters.iter().enumerate() {
        for w in members.windows(2) {
            ensure(w[0] < w[1], || format!("cluster {c} members out of insertion order"))?;
        }
        for &m in members {
            where_is.insert(m, c);
        }
    }
    let firsts: Vec<usize> = clusters.iter().map(|m| m[0]).collect();
    ensure(firsts.windows(2).all(|w| w[0] < w[1]), || "clusters out of creation order".into())?;
    let nbrs: Vec<HashSet<usize>> = (0..graph.len()).map(|i| graph.neighbors(i).collect()).collect();
    for node in 0..graph.len() {
        let mut best: Option<(usize, usize)> = None;
        for (c, members) in clusters.iter().enumerate() {
            let before: Vec<usize> = members.iter().copied().filter(|&m| m < node).collect();
            if before.is_empty() {
                continue;
            }
            let count = before.iter().filter(|m| nbrs[node].contains(m)).count();
            if count > 0 && 2 * count >= before.len() && best.map_or(true, |(_, b)| count > b) {
                best = Some((c, count));
            }
        }
        let actual = where_is[&node];
        match best {
            Some((c, _)) => ensure(actual == c, || format!("node {node} went to {actual}, expected {c}"))?,
            None => ensure(clusters[actual][0] == node, || format!("node {node} should open a cluster"))?,
        }
    }
    Ok(())
}

fn clustering_properties() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1u64);
    for case in 0..1000 {
        let n = rng.random_range(1..=40);
        let cliques = rng.random_range(1..=n);
        let label: Vec<usize> = (0..n).map(|_| rng.random_range(0..cliques)).collect();
        let mut g = graph_of(n);
        for i in 0..n {
            for j in i + 1..n {
                if label[i] == label[j] {
                    g.add_edge_idx(i, j);
                }
            }
        }
        let clusters = cluster_greedy_idx(&g);
        check_partition(n, &clusters).map_err(|e| format!("clique case {case}: {e}"))?;
        let got: BTreeSet<Vec<usize>> = clusters.into_iter().collect();
        let mut want: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in label.iter().enumerate() {
            want.entry(l).or_default().push(i);
        }
        let want: BTreeSet<Vec<usize>> = want.into_values().collect();
        ensure(got == want, || format!("clique case {case}: cliques not recovered"))?;
    }
    for case in 0..1000 {
        let n = rng.random_range(1..=40);
        let density: f64 = rng.random_range(0.05..0.9);
        let mut g = graph_of(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    g.add_edge_idx(i, j);
                }
            }
        }
        let clusters = cluster_greedy_idx(&g);
        check_partition(n, &clusters).map_err(|e| format!("random case {case}: {e}"))?;
        check_insertion(&g, &clusters).map_err(|e| format!("random case {case}: {e}"))?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("1000 clique graphs recovered, 1000 random graphs replayed, {took:?}"))
}

fn dcg(gains: &[bool], k: usize) -> f64 {
    gains
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum()
}

fn permutations(items: &mut Vec<bool>, at: usize, visit: &mut impl FnMut(&[bool])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permutations(items, at + 1, visit);
        items.swap(at, i);
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e7);
    let mut ndcg_cases = 0;
    for len in 0..=6usize {
        for mask in 0..(1u32 << len) {
            for extra in 0..=1usize {
                for k in 1..=7usize {
                    let ranked: Vec<String> = (0..len).map(|i| format!("r{i}")).collect();
                    let mut relevant: HashSet<String> =
                        (0..len).filter(|i| mask >> i & 1 == 1).map(|i| format!("r{i}")).collect();
                    if extra == 1 {
                        relevant.insert("unretrieved".into());
                    }
                    let gains: Vec<bool> = (0..len).map(|i| mask >> i & 1 == 1).collect();
                    // Best achievable DCG over every ordering of the retrieved
                    // items plus any unretrieved relevant one.
                    let mut pool = gains.clone();
                    pool.extend(std::iter::repeat(true).take(extra));
                    let mut ideal = 0.0f64;
                    permutations(&mut pool, 0, &mut |p| ideal = ideal.max(dcg(p, k)));
                    let want = if ideal == 0.0 { 0.0 } else { dcg(&gains, k) / ideal };
                    let got = ndcg_at_k(&ranked, &relevant, k);
                    ensure(close(got, want), || format!("ndcg len {len} mask {mask:b} extra {extra} k {k}: {got} vs {want}"))?;
                    ndcg_cases += 1;
                }
            }
        }
    }

    for case in 0..10_000 {
        let universe: Vec<String> = (0..15).map(|i| format!("u{i}")).collect();
        let mut ranked = universe.clone();
        ranked.shuffle(&mut rng);
        ranked.truncate(rng.random_range(0..=12));
        let relevant: HashSet<String> = universe.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
        let k = rng.random_range(1..=12);
        let top: HashSet<&String> = ranked.iter().take(k).collect();
        let hits = top.iter().filter(|id| relevant.contains(**id)).count() as f64;
        let (p, r) = if relevant.is_empty() {
            (0.0, 0.0)
        } else {
            (hits / k as f64, hits / k.min(relevant.len()) as f64)
        };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let got = prf_at_k(&ranked, &relevant, k);
        ensure(close(got.precision, p) && close(got.recall, r) && close(got.f1, f), || {
            format!("prf case {case}: {got:?} vs ({p}, {r}, {f})")
        })?;
        let hit = u8::from(hits > 0.0);
        ensure(hit_at_k(&ranked, &relevant, k) == hit, || format!("hit case {case}"))?;
    }

    let mut grid: Vec<(f64, f64, f64)> = Vec::new();
    let steps = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
    for &p in &steps {
        for &r in &steps {
            for &m in &steps {
                grid.push((p, r, m));
            }
        }
    }
    grid.extend((0..2000).map(|_| (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>())));
    for &(p, r, m) in &grid {
        let removed_true = p * r;
        let want = if removed_true == 0.0 { 0.0 } else { 1.0 / (1.0 + m * (1.0 - r) / removed_true) };
        let got = dedup_recall_estimate(p, r, m).map_err(|e| e.to_string())?;
        ensure(close(got, want), || format!("estimate ({p}, {r}, {m}): {got} vs {want}"))?;
    }
    ensure(dedup_recall_estimate(0.8, 0.3, 0.0) == Ok(1.0), || "m = 0 must give 1".into())?;
    ensure(dedup_recall_estimate(0.0, 0.3, 0.2) == Ok(0.0), || "precision 0 must give 0".into())?;
    for bad in [(-0.1, 0.5, 0.5), (0.5, 1.1, 0.5), (0.5, 0.5, f64::NAN)] {
        ensure(dedup_recall_estimate(bad.0, bad.1, bad.2).is_err(), || format!("{bad:?} accepted"))?;
    }
    Ok(format!("{ndcg_cases} ndcg cases, 10000 prf/hit cases, {} estimate cases", grid.len() + 2))
}

fn challenge(id: String, action: String) -> Challenge {
    Challenge {
        title: format!("Title {id}"),
        description: String::new(),
        wish: "wish".into(),
        daily_action: action,
        source_url: format!("https://example.com/{id}"),
        created_from: CreatedFrom::Fixture,
        id,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(v) = EmbeddingVector::normalized(&raw) {
            return v;
        }
    }
}

fn oracle_dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

fn retrieval_oracle() -> Outcome {
    let dim = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x70c);
    let mut tie_cases = 0;
    for case in 0..500 {
        let n = rng.random_range(0..=200);
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        let mut vectors: Vec<EmbeddingVector> = Vec::with_capacity(n);
        for _ in 0..n {
            if !vectors.is_empty() && rng.random_bool(0.2) {
                let copy = vectors[rng.random_range(0..vectors.len())].clone();
                vectors.push(copy);
            } else {
                vectors.push(random_unit(&mut rng, dim));
            }
        }
        let items: Vec<(Challenge, EmbeddingVector)> = ids
            .iter()
            .zip(&vectors)
            .map(|(&i, v)| (challenge(format!("c{i:05}"), format!("action {i}")), v.clone()))
            .collect();
        let store = ChallengeStore::new(dim, "oracle", items.clone()).map_err(|e| e.to_string())?;
        let query = if n > 0 && rng.random_bool(0.5) {
            vectors[rng.random_range(0..n)].clone()
        } else {
            random_unit(&mut rng, dim)
        };
        let k = rng.random_range(0..=n + 5);
        let mut want: Vec<(String, f64)> = items
            .iter()
            .map(|(c, v)| (c.id.clone(), oracle_dot(query.values(), v.values())))
            .collect();
        want.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        want.truncate(k);
        if want.windows(2).any(|w| w[0].1 == w[1].1) {
            tie_cases += 1;
        }
        let got = store.topk(&query, k).map_err(|e| e.to_string())?;
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, w)| g.0 == w.0 && g.1.to_bits() == w.1.to_bits());
        ensure(same, || format!("case {case}: top-{k} of {n} differs from the oracle"))?;

        let back = ChallengeStore::from_bytes(&store.to_bytes()).map_err(|e| e.to_string())?;
        let bits = |s: &ChallengeStore| -> Vec<u32> {
            s.vectors().iter().flat_map(|v| v.values().iter().map(|x| x.to_bits())).collect()
        };
        ensure(back == store && bits(&back) == bits(&store), || format!("case {case}: round trip differs"))?;
        ensure(back.to_bytes() == store.to_bytes(), || format!("case {case}: re-encoding differs"))?;
    }
    ensure(tie_cases > 0, || "no tie cases were generated".into())?;
    Ok(format!("500 stores match the full-sort oracle ({tie_cases} with ties); round trips bit-exact"))
}

/// Judge that answers validation requests with seeded coin flips.
struct CoinJudge {
    seed: u64,
}

impl Judge for CoinJudge {
    fn judge_json(&self, request: &JudgeRequest) -> Result<JudgeResponse, ProviderError> {
        let listing: Vec<serde_json::Value> = serde_json::from_str(&request.bindings["candidates"])
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        let wish = request.bindings["wish"].as_bytes();
        let salt = wish.iter().fold(self.seed, |h, &b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
        let mut rng = ChaCha8Rng::seed_from_u64(salt);
        let value = serde_json::json!((0..listing.len()).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>());
        Ok(JudgeResponse {
            raw: value.to_string(),
            value,
        })
    }
}

const WORDS: &[&str] = &[
    "walk", "read", "write", "stretch", "cook", "sleep", "journal", "run", "swim", "draw", "paint", "call", "save",
    "plan", "sing", "code", "garden", "meditate", "breathe", "clean",
];

fn pipeline_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ea);
    let embedder = HashEmbedder::new(3);
    let reranker = CosineReranker::new(3);
    for case in 0..300 {
        let n = rng.random_range(0..=60);
        let items: Vec<(Challenge, EmbeddingVector)> = (0..n)
            .map(|i| {
                let action: Vec<&str> = (0..4).map(|_| *WORDS.choose(&mut rng).expect("words")).collect();
                let action = action.join(" ");
                let v = embedder.embed_one(&action);
                (challenge(format!("c{i:05}"), action), v)
            })
            .collect();
        let store = ChallengeStore::new(64, "mock", items).map_err(|e| e.to_string())?;
        let wish = format!("{} {}", WORDS.choose(&mut rng).expect("words"), WORDS.choose(&mut rng).expect("words"));
        let retrieve_k = rng.random_range(1..=80);
        let candidates = retrieve(&store, &embedder, &wish, retrieve_k).map_err(|e| e.to_string())?;
        let before: Vec<String> = candidates.iter().map(|c| c.challenge.id.clone()).collect();

        let (reranked, degraded) = rerank_candidates(&reranker, &wish, candidates);
        ensure(!degraded, || format!("case {case}: rerank degraded"))?;
        let after: Vec<String> = reranked.iter().map(|c| c.challenge.id.clone()).collect();
        let mut a = before.clone();
        let mut b = after.clone();
        a.sort();
        b.sort();
        ensure(a == b, || format!("case {case}: rerank is not a permutation"))?;

        let judge = CoinJudge { seed: case };
        let (kept, degraded) = validate_candidates(&judge, &wish, reranked);
        ensure(!degraded, || format!("case {case}: validation degraded"))?;
        let mut rest = after.iter();
        let subsequence = kept.iter().all(|c| rest.any(|id| *id == c.challenge.id));
        ensure(subsequence, || format!("case {case}: validation output is not a subsequence"))?;
        ensure(kept.iter().all(|c| c.validated), || format!("case {case}: unvalidated item kept"))?;
    }
    Ok("300 random candidate lists: rerank permutes, validation keeps a subsequence".into())
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).expect("create dir");
    for entry in std::fs::read_dir(from).expect("read fixture dir") {
        let entry = entry.expect("dir entry");
        let name = entry.file_name();
        if name == "out" {
            continue;
        }
        let src = entry.path();
        if src.is_dir() {
            copy_tree(&src, &to.join(&name));
        } else {
            std::fs::copy(&src, to.join(&name)).expect("copy fixture file");
        }
    }
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("read dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).expect("read artifact"));
            }
        }
    }
    out
}

struct PipelineRuns {
    _dirs: Vec<tempfile::TempDir>,
    work: PathBuf,
    fixture: PathBuf,
    outcome: Result<Duration, String>,
}

fn run_pipeline_twice() -> PipelineRuns {
    let start = Instant::now();
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    let mut outcome = Ok(());
    for dir in &dirs {
        copy_tree(&fixtures_dir(), dir.path());
        let status = Command::new(env!("CARGO_BIN_EXE_forge"))
            .arg("all")
            .arg("--config")
            .arg(dir.path().join("config.json"))
            .output()
            .expect("forge runs");
        if !status.status.success() {
            outcome = Err(format!("forge all failed: {}", String::from_utf8_lossy(&status.stderr).trim()));
            break;
        }
    }
    let took = start.elapsed();
    let outcome = outcome.and_then(|()| {
        let a = tree_bytes(&dirs[0].path().join("out"));
        let b = tree_bytes(&dirs[1].path().join("out"));
        ensure(a.contains_key("manifest.json"), || "no manifest written".into())?;
        ensure(a.keys().eq(b.keys()), || "runs wrote different file sets".into())?;
        let differing: Vec<&String> = a.iter().filter(|(k, v)| b.get(*k) != Some(*v)).map(|(k, _)| k).collect();
        ensure(differing.is_empty(), || format!("files differ: {differing:?}"))?;
        Ok(took)
    });
    PipelineRuns {
        work: dirs[0].path().join("out"),
        fixture: dirs[0].path().to_path_buf(),
        _dirs: dirs,
        outcome,
    }
}

fn end_to_end(runs: &PipelineRuns) -> Outcome {
    let took = runs.outcome.clone()?;
    ensure(took < Duration::from_secs(120), || format!("two runs took {took:?}"))?;
    let files = tree_bytes(&runs.work).len();
    Ok(format!("two runs wrote {files} byte-identical files in {took:?}"))
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_jsonl(&bytes[..]).map_err(|e| format!("{}: {e}", path.display()))
}

fn eval_on_fixture(runs: &PipelineRuns) -> Outcome {
    runs.outcome.clone()?;
    let bytes = std::fs::read(runs.work.join("reports/eval_report.json")).map_err(|e| e.to_string())?;
    let report: EvalReport = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    ensure(RunConfig::NoFiltering.label() == "- Filtering", || "label changed".into())?;
    let unfiltered = report.rows.iter().filter(|r| r.config == RunConfig::NoFiltering).count();
    ensure(unfiltered == report.queries && report.queries > 0, || {
        format!("{unfiltered} unfiltered rows for {} queries", report.queries)
    })?;
    let full = report.aggregate(RunConfig::Filtering, None).ok_or("no Full aggregate")?.scores.f1_at_3;
    let plain = report.aggregate(RunConfig::NoFiltering, None).ok_or("no unfiltered aggregate")?.scores.f1_at_3;
    ensure(full >= plain, || format!("F1@3 validated {full:.3} < unvalidated {plain:.3}"))?;
    Ok(format!("{} queries; F1@3 validated {full:.3} >= unvalidated {plain:.3}", report.queries))
}

fn url_filter(runs: &PipelineRuns) -> Outcome {
    runs.outcome.clone()?;
    let mut raw: BTreeSet<String> = BTreeSet::new();
    for name in ["general.jsonl", "themed.jsonl"] {
        let records: Vec<SearchResultRecord> = read_lines(&runs.fixture.join("serp").join(name))?;
        raw.extend(records.iter().filter_map(|r| normalize_url(&r.url).ok()));
    }
    let after: Vec<SearchResultRecord> = read_lines(&runs.work.join("serp_records.jsonl"))?;
    let after: BTreeSet<String> = after.iter().filter_map(|r| normalize_url(&r.url).ok()).collect();
    let removed: BTreeSet<String> = raw.difference(&after).cloned().collect();
    let (blocked, kept) = bundle::expected_filter(6);
    let blocked: BTreeSet<String> = blocked.into_iter().collect();
    ensure(removed == blocked, || format!("blocklist removed {removed:?}, expected {blocked:?}"))?;

    let pages: Vec<PageDocument> = read_lines(&runs.work.join("pages_kept.jsonl"))?;
    let got: BTreeSet<String> = pages.iter().filter_map(|p| normalize_url(&p.url).ok()).collect();
    let want: BTreeSet<String> = kept.into_iter().collect();
    ensure(got == want, || format!("kept {got:?}, expected {want:?}"))?;
    ensure(pages.iter().all(|p| p.likelihood.is_some_and(|s| s >= 6)), || "kept page below threshold".into())?;
    Ok(format!("blocklist removed {} URLs, {} pages kept at threshold 6", removed.len(), got.len()))
}

fn run(name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL  {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let runs = run_pipeline_twice();
    let results = [
        run("dedup on planted fixture", planted_dedup),
        run("ablation ordering", ablation_ordering),
        run("clustering properties", clustering_properties),
        run("metric oracles", metric_oracles),
        run("retrieval oracle", retrieval_oracle),
        run("search pipeline contracts", || {
            let contracts = pipeline_contracts()?;
            let eval = eval_on_fixture(&runs)?;
            Ok(format!("{contracts}; {eval}"))
        }),
        run("end-to-end determinism", || end_to_end(&runs)),
        run("url filter", || url_filter(&runs)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
