use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cluster::MatchGraph;
use super::normalize::{normalize_for_match, Stopwords};
use crate::model::Challenge;

pub const SHINGLE_CHARS: usize = 3;
pub const PERMUTATIONS: usize = 128;
pub const DEFAULT_JACCARD: f64 = 0.5;

const MERSENNE_61: u64 = (1 << 61) - 1;

/// Overlapping character 3-grams. A nonempty string shorter than three
/// chars is its own single shingle.
pub fn shingles(text: &str) -> BTreeSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return BTreeSet::new();
    }
    if chars.len() < SHINGLE_CHARS {
        return BTreeSet::from([text.to_string()]);
    }
    chars
        .windows(SHINGLE_CHARS)
        .map(|w| w.iter().collect())
        .collect()
}

pub fn exact_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn shingle_hash(s: &str) -> u64 {
    // FNV-1a, reduced into the field.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h % MERSENNE_61
}

/// A family of `(a * x + b) mod p` hash functions over the Mersenne prime
/// `2^61 - 1`, drawn from a seeded generator.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(permutations: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..permutations)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        Self { coeffs }
    }

    /// Per-permutation minimum; `None` for an empty shingle set.
    pub fn signature(&self, shingles: &BTreeSet<String>) -> Option<Vec<u64>> {
        if shingles.is_empty() {
            return None;
        }
        let xs: Vec<u64> = shingles.iter().map(|s| shingle_hash(s)).collect();
        Some(
            self.coeffs
                .iter()
                .map(|&(a, b)| {
                    xs.iter()
                        .map(|&x| ((u128::from(a) * u128::from(x) + u128::from(b)) % u128::from(MERSENNE_61)) as u64)
                        .min()
                        .expect("nonempty")
                })
                .collect(),
        )
    }

    pub fn estimate(a: &[u64], b: &[u64]) -> f64 {
        let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
        same as f64 / a.len().max(1) as f64
    }
}

/// MinHash matching on normalized daily actions: an edge for every pair
/// whose estimated Jaccard similarity reaches `threshold`.
pub fn minhash_pairs(
    challenges: &[Challenge],
    stopwords: &Stopwords,
    threshold: f64,
    seed: u64,
) -> MatchGraph {
    assert!(threshold > 0.0 && threshold <= 1.0, "jaccard threshold must be in (0, 1]");
    let hasher = MinHasher::new(PERMUTATIONS, seed);
    let sigs: Vec<Option<Vec<u64>>> = challenges
        .iter()
        .map(|c| hasher.signature(&shingles(&normalize_for_match(&c.daily_action, stopwords).normalized)))
        .collect();
    let edges: Vec<(usize, usize)> = (0..sigs.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let sigs = &sigs;
            (i + 1..sigs.len()).filter_map(move |j| match (&sigs[i], &sigs[j]) {
                (Some(a), Some(b)) if MinHasher::estimate(a, b) >= threshold => Some((i, j)),
                _ => None,
            })
        })
        .collect();
    let mut graph = MatchGraph::new(challenges.iter().map(|c| c.id.clone()));
    for (i, j) in edges {
        graph.add_edge_idx(i, j);
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shingling() {
        assert_eq!(
            shingles("abcd").into_iter().collect::<Vec<_>>(),
            vec!["abc", "bcd"]
        );
        assert_eq!(shingles("ab").len(), 1);
        assert!(shingles("").is_empty());
    }

    #[test]
    fn identical_and_disjoint() {
        let h = MinHasher::new(PERMUTATIONS, 1);
        let a = h.signature(&shingles("read ten pages")).unwrap();
        let b = h.signature(&shingles("read ten pages")).unwrap();
        let c = h.signature(&shingles("xyzqwv")).unwrap();
        assert_eq!(MinHasher::estimate(&a, &b), 1.0);
        assert!(MinHasher::estimate(&a, &c) < 0.05);
    }

    #[test]
    fn estimates_track_exact_jaccard() {
        // 100 seeded pairs: a random word string and a copy with a random
        // number of words replaced, so exact similarities span the range.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let words = ["walk", "read", "cook", "sleep", "water", "tea", "run", "write", "call", "clean", "plan", "learn"];
        let h = MinHasher::new(PERMUTATIONS, 7);
        let mut worst: f64 = 0.0;
        let mut total = 0.0;
        for _ in 0..100 {
            let n = rng.random_range(3..9);
            let a: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
            let mut b = a.clone();
            for _ in 0..rng.random_range(0..n) {
                let at = rng.random_range(0..n);
                b[at] = words[rng.random_range(0..words.len())];
            }
            let (sa, sb) = (shingles(&a.join(" ")), shingles(&b.join(" ")));
            let est = MinHasher::estimate(&h.signature(&sa).unwrap(), &h.signature(&sb).unwrap());
            let err = (est - exact_jaccard(&sa, &sb)).abs();
            worst = worst.max(err);
            total += err;
        }
        // One estimate has standard error at most 0.5 / sqrt(128) = 0.044.
        assert!(total / 100.0 <= 0.05, "mean estimate error {}", total / 100.0);
        assert!(worst <= 0.15, "largest estimate error {worst}");
    }
}
