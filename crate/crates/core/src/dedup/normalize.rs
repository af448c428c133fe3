use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

const BUILTIN: &str = include_str!("../../data/stopwords.txt");

/// Tokens dropped before string comparison. Entries are stored in
/// normalized form, so `30-day` in the file matches `30day` in text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN)
    }

    /// One token per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| fold(l).split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        std::fs::read_to_string(path).map(|t| Self::parse(&t))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedText {
    pub original: String,
    pub normalized: String,
}

/// Lowercase, then delete every character that is neither alphanumeric nor
/// whitespace.
fn fold(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect()
}

pub fn normalize_for_match(text: &str, stopwords: &Stopwords) -> NormalizedText {
    let folded = fold(text);
    let normalized = folded
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .collect::<Vec<_>>()
        .join(" ");
    NormalizedText {
        original: text.to_string(),
        normalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(s: &str) -> String {
        normalize_for_match(s, &Stopwords::builtin()).normalized
    }

    #[test]
    fn domain_stopwords() {
        assert_eq!(norm("30-Day Water Challenge!"), "water");
        assert_eq!(norm(""), "");
        assert_eq!(norm("Improve improve IMPROVE"), "");
    }

    #[test]
    fn negations_survive() {
        assert_eq!(norm("Don't eat sugar"), "dont eat sugar");
        assert_eq!(norm("no phone after 9pm"), "no phone 9pm");
    }

    #[test]
    fn punctuation_and_spacing() {
        assert_eq!(norm("  Cook a new   meal, every day!! "), "cook new meal every");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}") {
            let sw = Stopwords::builtin();
            let once = normalize_for_match(&s, &sw).normalized;
            let twice = normalize_for_match(&once, &sw).normalized;
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn deterministic_and_clean(s in "[A-Za-z0-9 ,.!?'-]{0,40}") {
            let sw = Stopwords::builtin();
            let a = normalize_for_match(&s, &sw).normalized;
            prop_assert_eq!(&a, &normalize_for_match(&s, &sw).normalized);
            prop_assert!(!a.contains("  ") && a.trim() == a);
            prop_assert!(a.chars().all(|c| c.is_alphanumeric() || c == ' '));
        }
    }
}
