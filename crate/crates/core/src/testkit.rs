//! Seeded synthetic corpora with known duplicate structure, for tests and
//! the acceptance suite.
//!
//! Texts are built from made-up words chosen by their bucket under the mock
//! hash embedder, so cosine similarities are exact fractions: two six-word
//! actions sharing `s` buckets have cosine `s / 6`. Every text uses six
//! distinct buckets and texts from different groups share at most three
//! (cosine 0.5, below the ambiguous band) unless a case plants more.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{format_id, Challenge, CreatedFrom};
use crate::providers::mock::{CosineReranker, HashEmbedder, MockJudge, MockJudgeTable};
use crate::providers::{FanOut, Providers};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr", "pl", "st", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "n", "r", "l", "sk", "m", "x"];

/// Providers over the mock embedder, judge and reranker, all with `seed`.
pub fn mock_providers(seed: u64, table: MockJudgeTable) -> Providers {
    Providers {
        embedder: Arc::new(HashEmbedder::new(seed)),
        judge: Arc::new(MockJudge::new(table)),
        reranker: Arc::new(CosineReranker::new(seed)),
        fan_out: FanOut::sequential(),
    }
}

/// Draws pronounceable nonsense words, never repeating one.
struct WordSource<'a> {
    rng: ChaCha8Rng,
    embedder: &'a HashEmbedder,
    used: BTreeSet<String>,
}

impl<'a> WordSource<'a> {
    fn new(seed: u64, embedder: &'a HashEmbedder) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            embedder,
            used: BTreeSet::new(),
        }
    }

    fn pick<'s>(&mut self, from: &'s [&'s str]) -> &'s str {
        from[self.rng.random_range(0..from.len())]
    }

    /// A fresh word whose bucket is not in `avoid`. Returns the word and
    /// its bucket.
    fn word(&mut self, avoid: &BTreeSet<usize>) -> (String, usize) {
        loop {
            let syllables = self.rng.random_range(2..4);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(self.pick(ONSETS));
                w.push_str(self.pick(VOWELS));
            }
            w.push_str(self.pick(CODAS));
            let b = self.embedder.bucket(&w);
            if !avoid.contains(&b) && self.used.insert(w.clone()) {
                return (w, b);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Text {
    words: Vec<String>,
    buckets: BTreeSet<usize>,
}

impl Text {
    fn action(&self) -> String {
        self.words.join(" ")
    }

    fn overlap(&self, other: &Text) -> usize {
        self.buckets.intersection(&other.buckets).count()
    }
}

/// How a planted member relates to its group's base text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Base,
    /// Same words, different case and punctuation.
    Surface,
    /// Last word swapped: cosine 5/6 with the base.
    Paraphrase,
    /// Last two words swapped: cosine 4/6 with base and paraphrase.
    Ambiguous,
    /// Shares four words with some base but is judged distinct.
    Decoy,
    Unrelated,
}

/// A corpus plus its ground truth.
#[derive(Debug, Clone)]
pub struct Fixture {
    /// In processing order; ids assigned in this order.
    pub challenges: Vec<Challenge>,
    /// Ground-truth group label for every id.
    pub group_of: HashMap<String, String>,
    pub variant_of: HashMap<String, Variant>,
    /// Pair verdicts for the pair-match judge: true for every same-group
    /// pair, default false otherwise.
    pub judge: MockJudgeTable,
}

impl Fixture {
    pub fn groups(&self) -> usize {
        self.group_of.values().collect::<BTreeSet<_>>().len()
    }

    /// Removals a perfect dedup makes: corpus size minus group count.
    pub fn expected_removals(&self) -> usize {
        self.challenges.len() - self.groups()
    }
}

struct Builder<'a> {
    words: WordSource<'a>,
    /// Every text so far with its group index.
    texts: Vec<(usize, Text, Variant)>,
}

impl<'a> Builder<'a> {
    /// `keep` words plus `fresh` new ones, none of which lands in a bucket
    /// of `keep` or `avoid`.
    fn text(&mut self, keep: &[(String, usize)], fresh: usize, avoid: &BTreeSet<usize>) -> Text {
        let mut words: Vec<String> = keep.iter().map(|(w, _)| w.clone()).collect();
        let mut buckets: BTreeSet<usize> = keep.iter().map(|(_, b)| *b).collect();
        let mut blocked: BTreeSet<usize> = buckets.union(avoid).copied().collect();
        for _ in 0..fresh {
            let (w, b) = self.words.word(&blocked);
            words.push(w);
            buckets.insert(b);
            blocked.insert(b);
        }
        Text { words, buckets }
    }

    fn pairs(t: &Text, n: usize, embedder: &HashEmbedder) -> Vec<(String, usize)> {
        t.words[..n].iter().map(|w| (w.clone(), embedder.bucket(w))).collect()
    }

    /// Texts for one group, retried until nothing collides with other
    /// groups beyond three shared buckets.
    fn group(&mut self, gid: usize, variants: &[Variant], embedder: &HashEmbedder, decoy_of: Option<&Text>) -> Vec<(Text, Variant)> {
        'retry: loop {
            let mut made: Vec<(Text, Variant)> = Vec::new();
            let base = match decoy_of {
                Some(target) => {
                    let keep = Self::pairs(target, 4, embedder);
                    self.text(&keep, 2, &target.buckets)
                }
                None => self.text(&[], 6, &BTreeSet::new()),
            };
            for &v in variants {
                let t = match v {
                    Variant::Base | Variant::Unrelated | Variant::Decoy => base.clone(),
                    Variant::Surface => base.clone(),
                    Variant::Paraphrase => {
                        let keep = Self::pairs(&base, 5, embedder);
                        self.text(&keep, 1, &base.buckets)
                    }
                    Variant::Ambiguous => {
                        let keep = Self::pairs(&base, 4, embedder);
                        self.text(&keep, 2, &base.buckets)
                    }
                };
                made.push((t, v));
            }
            for (t, _) in &made {
                for (other_gid, o, _) in &self.texts {
                    // A decoy may share four buckets with its target's group.
                    let allowed = if decoy_of.is_some_and(|d| d.overlap(o) >= 4) { 4 } else { 3 };
                    if *other_gid != gid && t.overlap(o) > allowed {
                        continue 'retry;
                    }
                }
            }
            for (t, v) in &made {
                self.texts.push((gid, t.clone(), *v));
            }
            return made;
        }
    }
}

fn surface(action: &str) -> String {
    let mut words: Vec<String> = action.split(' ').map(str::to_string).collect();
    for w in words.iter_mut().step_by(2) {
        *w = w.to_uppercase();
    }
    format!("{}!", words.join(", "))
}

fn challenge(id: String, group: usize, action: String, member: usize) -> Challenge {
    let first = action.split(' ').next().unwrap_or("").trim_matches(|c: char| !c.is_alphanumeric());
    Challenge {
        id,
        title: format!("Group {group} {first}"),
        // Member 0 has the longest description so the base is the
        // representative whatever order the group arrives in.
        description: format!("{}{action}", "Keep at it. ".repeat(4 - member.min(3))),
        wish: format!("wish {group}"),
        daily_action: action,
        source_url: format!("https://fixture.test/g{group}"),
        created_from: CreatedFrom::Fixture,
    }
}

fn assemble(rng: &mut ChaCha8Rng, entries: Vec<(usize, String, Variant, usize)>, shuffle: bool) -> Fixture {
    let mut entries = entries;
    if shuffle {
        entries.shuffle(rng);
    }
    let mut fx = Fixture {
        challenges: Vec::new(),
        group_of: HashMap::new(),
        variant_of: HashMap::new(),
        judge: MockJudgeTable::default(),
    };
    let mut by_group: HashMap<usize, Vec<String>> = HashMap::new();
    for (i, (group, action, variant, member)) in entries.into_iter().enumerate() {
        let id = format_id(i + 1);
        fx.group_of.insert(id.clone(), format!("g{group:03}"));
        fx.variant_of.insert(id.clone(), variant);
        by_group.entry(group).or_default().push(action.clone());
        fx.challenges.push(challenge(id, group, action, member));
    }
    let mut groups: Vec<_> = by_group.into_iter().collect();
    groups.sort();
    for (_, actions) in groups {
        for i in 0..actions.len() {
            for j in i + 1..actions.len() {
                fx.judge.set_duplicate(&actions[i], &actions[j], true);
            }
        }
    }
    fx
}

/// 200 challenges: 60 planted groups (20 pairs, 30 triples, 10
/// quadruples) mixing surface, paraphrase and ambiguous-band variants, plus
/// 30 singletons of which 10 are decoys sharing four words with a group.
/// Expected removals: 110.
pub fn planted_fixture(seed: u64, embedder: &HashEmbedder) -> Fixture {
    use Variant::*;
    let mut b = Builder {
        words: WordSource::new(seed, embedder),
        texts: Vec::new(),
    };
    let mut shapes: Vec<Vec<Variant>> = Vec::new();
    for i in 0..20 {
        shapes.push(if i % 2 == 0 { vec![Base, Surface] } else { vec![Base, Paraphrase] });
    }
    for i in 0..30 {
        shapes.push(match i % 3 {
            0 => vec![Base, Paraphrase, Ambiguous],
            1 => vec![Base, Surface, Paraphrase],
            _ => vec![Base, Surface, Ambiguous],
        });
    }
    for _ in 0..10 {
        shapes.push(vec![Base, Surface, Paraphrase, Ambiguous]);
    }
    let mut entries = Vec::new();
    for (gid, shape) in shapes.iter().enumerate() {
        for (member, (t, v)) in b.group(gid, shape, embedder, None).into_iter().enumerate() {
            let action = if v == Surface { surface(&t.action()) } else { t.action() };
            entries.push((gid, action, v, member));
        }
    }
    let mut gid = shapes.len();
    for d in 0..10 {
        // Decoys target the bases of the three- and four-member groups.
        let target = b
            .texts
            .iter()
            .find(|(g, _, v)| *g == 20 + d * 4 && *v == Base)
            .map(|(_, t, _)| t.clone())
            .expect("target base exists");
        let (t, _) = b.group(gid, &[Decoy], embedder, Some(&target)).remove(0);
        entries.push((gid, t.action(), Decoy, 0));
        gid += 1;
    }
    for _ in 0..20 {
        let (t, _) = b.group(gid, &[Unrelated], embedder, None).remove(0);
        entries.push((gid, t.action(), Unrelated, 0));
        gid += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    assemble(&mut rng, entries, true)
}

/// `n` groups of three (base, surface variant, paraphrase). A correct dedup
/// keeps exactly `n`.
pub fn triplet_fixture(n: usize, seed: u64, embedder: &HashEmbedder) -> Fixture {
    use Variant::*;
    let mut b = Builder {
        words: WordSource::new(seed, embedder),
        texts: Vec::new(),
    };
    let mut entries = Vec::new();
    for gid in 0..n {
        for (member, (t, v)) in b.group(gid, &[Base, Surface, Paraphrase], embedder, None).into_iter().enumerate() {
            let action = if v == Surface { surface(&t.action()) } else { t.action() };
            entries.push((gid, action, v, member));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assemble(&mut rng, entries, true)
}

/// A ten-node similarity chain plus four true duplicate pairs.
///
/// Chain node `i` uses words `i..i + 4` of one sequence, so neighbors share
/// three of four buckets (cosine 0.75, a direct match) and nodes two apart
/// share two (cosine 0.5). Every chain node is its own ground-truth group.
/// Transitive closure fuses the whole chain; greedy clustering cannot.
pub fn chain_fixture(seed: u64, embedder: &HashEmbedder) -> Fixture {
    use Variant::*;
    let mut b = Builder {
        words: WordSource::new(seed, embedder),
        texts: Vec::new(),
    };
    let mut entries = Vec::new();
    let mut buckets = BTreeSet::new();
    let mut seq = Vec::new();
    for _ in 0..13 {
        let (w, bk) = b.words.word(&buckets);
        buckets.insert(bk);
        seq.push(w);
    }
    for i in 0..10 {
        entries.push((i, seq[i..i + 4].join(" "), Unrelated, 0));
    }
    let chain = Text {
        words: seq.clone(),
        buckets,
    };
    b.texts.push((usize::MAX, chain, Unrelated));
    // Pairs share at most three buckets with the chain's words, which keeps
    // them below 3 / sqrt(24) < 0.625 against any four-word node.
    for gid in 10..14 {
        for (member, (t, v)) in b.group(gid, &[Base, Paraphrase], embedder, None).into_iter().enumerate() {
            entries.push((gid, t.action(), v, member));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    assemble(&mut rng, entries, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::Embedder;

    fn cos(e: &HashEmbedder, a: &str, b: &str) -> f64 {
        e.embed_one(a).dot(&e.embed_one(b)).unwrap()
    }

    #[test]
    fn planted_shape() {
        let e = HashEmbedder::new(11);
        let fx = planted_fixture(11, &e);
        assert_eq!(fx.challenges.len(), 200);
        assert_eq!(fx.groups(), 90);
        assert_eq!(fx.expected_removals(), 110);
    }

    #[test]
    fn planted_similarities_are_exact() {
        let e = HashEmbedder::new(11);
        let fx = planted_fixture(11, &e);
        let by_group = |g: &str| -> Vec<&Challenge> {
            fx.challenges.iter().filter(|c| fx.group_of[&c.id] == g).collect()
        };
        for c in &fx.challenges {
            let v = fx.variant_of[&c.id];
            let base = by_group(&fx.group_of[&c.id])
                .into_iter()
                .find(|m| fx.variant_of[&m.id] == Variant::Base);
            let Some(base) = base else { continue };
            let s = cos(&e, &base.daily_action, &c.daily_action);
            let want = match v {
                Variant::Base | Variant::Surface => 1.0,
                Variant::Paraphrase => 5.0 / 6.0,
                Variant::Ambiguous => 4.0 / 6.0,
                _ => continue,
            };
            assert!((s - want).abs() < 1e-6, "{v:?}: {s}");
        }
        // Across groups nothing reaches the ambiguous band except decoys.
        let vs: Vec<_> = fx.challenges.iter().map(|c| e.embed_one(&c.daily_action)).collect();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                let (a, b) = (&fx.challenges[i], &fx.challenges[j]);
                if fx.group_of[&a.id] == fx.group_of[&b.id] {
                    continue;
                }
                let decoy = [a, b].iter().any(|c| fx.variant_of[&c.id] == Variant::Decoy);
                let s = vs[i].dot(&vs[j]).unwrap();
                assert!(s < 0.625 || (decoy && s < 0.7), "{} {} {s}", a.daily_action, b.daily_action);
            }
        }
    }

    #[test]
    fn chain_links() {
        let e = HashEmbedder::new(3);
        let fx = chain_fixture(3, &e);
        assert_eq!(fx.challenges.len(), 18);
        let a: Vec<&str> = fx.challenges[..10].iter().map(|c| c.daily_action.as_str()).collect();
        for i in 0..9 {
            assert!((cos(&e, a[i], a[i + 1]) - 0.75).abs() < 1e-6);
        }
        for i in 0..8 {
            assert!((cos(&e, a[i], a[i + 2]) - 0.5).abs() < 1e-6);
        }
        let _ = e.provider_tag();
    }

    #[test]
    fn seeded() {
        let e = HashEmbedder::new(5);
        assert_eq!(planted_fixture(5, &e).challenges, planted_fixture(5, &e).challenges);
        assert_eq!(triplet_fixture(20, 5, &e).challenges.len(), 60);
    }
}
