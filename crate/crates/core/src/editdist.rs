//! Unit-cost Levenshtein distance over normalized model numbers.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A model number folded to uppercase with all whitespace removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelNumberKey(String);

impl ModelNumberKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn chars(&self) -> Vec<char> {
        self.0.chars().collect()
    }
}

impl fmt::Display for ModelNumberKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn normalize_model_number(raw: &str) -> ModelNumberKey {
    ModelNumberKey(
        raw.chars()
            .filter(|c| !c.is_whitespace())
            .flat_map(char::to_uppercase)
            .collect(),
    )
}

/// Minimum number of single-character insertions, deletions and
/// substitutions turning `a` into `b`.
pub fn levenshtein(a: &ModelNumberKey, b: &ModelNumberKey) -> usize {
    char_distance(&a.chars(), &b.chars())
}

fn char_distance(a: &[char], b: &[char]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0; short.len() + 1];
    for (j, lc) in long.iter().enumerate() {
        cur[0] = j + 1;
        for (i, sc) in short.iter().enumerate() {
            let sub = prev[i] + usize::from(sc != lc);
            cur[i + 1] = sub.min(prev[i + 1] + 1).min(cur[i] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Returns `Some(distance)` when `levenshtein(a, b) <= max`, otherwise `None`.
///
/// Only the diagonal band of width `2 * max + 1` is filled, and the scan stops
/// as soon as a whole row exceeds `max`.
pub fn levenshtein_within(a: &ModelNumberKey, b: &ModelNumberKey, max: usize) -> Option<usize> {
    let a = a.chars();
    let b = b.chars();
    bounded_char_distance(&a, &b, max)
}

pub(crate) fn bounded_char_distance(a: &[char], b: &[char], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        let d = a.len().max(b.len());
        return (d <= max).then_some(d);
    }
    // Values above `max` are clamped to `cap` so they never re-enter the band.
    let cap = max + 1;
    let n = a.len();
    let mut prev = vec![cap; n + 1];
    let mut cur = vec![cap; n + 1];
    for (i, slot) in prev.iter_mut().enumerate().take(max.min(n) + 1) {
        *slot = i;
    }
    for (j, bc) in b.iter().enumerate() {
        let row = j + 1;
        let lo = row.saturating_sub(max);
        let hi = (row + max).min(n);
        cur.iter_mut().for_each(|v| *v = cap);
        if lo == 0 {
            cur[0] = row.min(cap);
        }
        let mut row_min = cur[0];
        for i in lo.max(1)..=hi {
            let sub = prev[i - 1] + usize::from(a[i - 1] != *bc);
            let v = sub.min(prev[i] + 1).min(cur[i - 1] + 1).min(cap);
            cur[i] = v;
            row_min = row_min.min(v);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[n];
    (d <= max).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(s: &str) -> ModelNumberKey {
        normalize_model_number(s)
    }

    // Exponential recursion straight from the definition.
    fn naive(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((ha, ta)), Some((hb, tb))) => {
                let sub = naive(ta, tb) + usize::from(ha != hb);
                sub.min(naive(ta, b) + 1).min(naive(a, tb) + 1)
            }
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(key(" k-596 bn ").as_str(), "K-596BN");
        assert_eq!(key("").as_str(), "");
        assert_eq!(key("A1").as_str(), "A1");
        assert_eq!(key("k-596bn"), key("K-596BN"));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein(&key("K-596BN"), &key("K-596CP")), 2);
        assert_eq!(levenshtein(&key("K-596BN"), &key("K-596BN")), 0);
        assert_eq!(levenshtein(&key(""), &key("ABC")), 3);
        assert_eq!(levenshtein(&key("KITTEN"), &key("SITTING")), 3);
        let kitten: Vec<char> = "KITTEN".chars().collect();
        let sitting: Vec<char> = "SITTING".chars().collect();
        assert_eq!(naive(&kitten, &sitting), 3);
    }

    #[test]
    fn bounded_examples() {
        assert_eq!(levenshtein_within(&key("K-596BN"), &key("K-596CP"), 2), Some(2));
        assert_eq!(levenshtein_within(&key("K-596BN"), &key("K-596CP"), 1), None);
        assert_eq!(levenshtein_within(&key("A"), &key("ABCD"), 2), None);
        assert_eq!(levenshtein_within(&key(""), &key(""), 0), Some(0));
        assert_eq!(levenshtein_within(&key(""), &key("AB"), 2), Some(2));
        assert_eq!(levenshtein_within(&key("KITTEN"), &key("SITTING"), 3), Some(3));
        assert_eq!(levenshtein_within(&key("KITTEN"), &key("SITTING"), 2), None);
    }

    #[test]
    fn counts_characters_not_bytes() {
        assert_eq!(levenshtein(&key("É1"), &key("E1")), 1);
    }

    proptest! {
        #[test]
        fn matches_naive_recursion(a in "[abc]{0,6}", b in "[abc]{0,6}") {
            let (ka, kb) = (key(&a), key(&b));
            let ca: Vec<char> = ka.as_str().chars().collect();
            let cb: Vec<char> = kb.as_str().chars().collect();
            prop_assert_eq!(levenshtein(&ka, &kb), naive(&ca, &cb));
        }

        #[test]
        fn bounded_agrees_with_full(a in "[a-d]{0,10}", b in "[a-d]{0,10}", max in 0usize..8) {
            let (ka, kb) = (key(&a), key(&b));
            let full = levenshtein(&ka, &kb);
            let expected = (full <= max).then_some(full);
            prop_assert_eq!(levenshtein_within(&ka, &kb, max), expected);
        }

        #[test]
        fn metric_axioms(a in "[a-c]{0,8}", b in "[a-c]{0,8}", c in "[a-c]{0,8}") {
            let (ka, kb, kc) = (key(&a), key(&b), key(&c));
            let ab = levenshtein(&ka, &kb);
            prop_assert_eq!(ab, levenshtein(&kb, &ka));
            prop_assert_eq!(ab == 0, ka == kb);
            prop_assert!(levenshtein(&ka, &kc) <= ab + levenshtein(&kb, &kc));
            let (la, lb) = (ka.as_str().len(), kb.as_str().len());
            prop_assert!(la.abs_diff(lb) <= ab && ab <= la.max(lb));
        }

        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,20}") {
            let once = normalize_model_number(&raw);
            prop_assert_eq!(normalize_model_number(once.as_str()), once.clone());
            prop_assert!(!once.as_str().chars().any(char::is_whitespace));
        }
    }
}
