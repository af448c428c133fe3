use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_for_match, Stopwords};
use crate::model::Challenge;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefilterConfig {
    /// Minimum normalized Levenshtein similarity of daily actions.
    pub action: f64,
    /// Minimum normalized Levenshtein similarity of titles.
    pub title: f64,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self {
            action: 0.92,
            title: 0.80,
        }
    }
}

/// `1 - distance / max_len` over chars; 1.0 for two empty strings.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrefilterOutcome {
    /// Indices into the input of the challenges that survive, ascending.
    pub survivors: Vec<usize>,
    /// `(removed index, kept index)`; the kept index is always a survivor
    /// that precedes the removed one.
    pub removed: Vec<(usize, usize)>,
}

struct Keys {
    action: String,
    title: String,
    action_len: usize,
}

/// Drops obvious string-level duplicates. Challenge `j` is removed in favor
/// of the earliest surviving `i < j` whose normalized daily action is equal,
/// or whose action and title similarities both clear the thresholds.
/// Challenges whose daily action normalizes to nothing are never matched.
pub fn prefilter_pairs(
    challenges: &[Challenge],
    stopwords: &Stopwords,
    config: &PrefilterConfig,
) -> PrefilterOutcome {
    let keys: Vec<Keys> = challenges
        .iter()
        .map(|c| {
            let action = normalize_for_match(&c.daily_action, stopwords).normalized;
            Keys {
                action_len: action.chars().count(),
                title: normalize_for_match(&c.title, stopwords).normalized,
                action,
            }
        })
        .collect();

    let mut out = PrefilterOutcome::default();
    let mut exact: HashMap<&str, usize> = HashMap::new();
    for (j, key) in keys.iter().enumerate() {
        if key.action.is_empty() {
            out.survivors.push(j);
            continue;
        }
        let mut kept = exact.get(key.action.as_str()).copied();
        if kept.is_none() {
            kept = out.survivors.iter().copied().find(|&i| {
                let other = &keys[i];
                // Cheap bound: the similarity cannot exceed
                // min_len / max_len, so skip pairs whose lengths differ too much.
                let (lo, hi) = if other.action_len < key.action_len {
                    (other.action_len, key.action_len)
                } else {
                    (key.action_len, other.action_len)
                };
                !other.action.is_empty()
                    && lo as f64 >= config.action * hi as f64
                    && levenshtein_similarity(&other.action, &key.action) >= config.action
                    && levenshtein_similarity(&other.title, &key.title) >= config.title
            });
        }
        match kept {
            Some(i) => out.removed.push((j, i)),
            None => {
                exact.insert(key.action.as_str(), j);
                out.survivors.push(j);
            }
        }
    }
    out
}
