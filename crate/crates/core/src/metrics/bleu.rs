use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// A zero precision zeroes the score.
    #[default]
    None,
    /// Add one to matches and totals for orders 2 and up.
    AddOne,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Candidate n-grams of order `n` matched against the references, each count
/// clipped by its largest count in any single reference, and the candidate's
/// n-gram total.
pub fn clipped_ngram_counts<T: Eq + Hash>(candidate: &[T], references: &[&[T]], n: usize) -> (u64, u64) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[T], u64> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, cand.values().sum())
}

/// Length of the reference closest in length to `cand_len`, the shorter one
/// on ties.
pub fn closest_ref_len(cand_len: usize, ref_lens: impl IntoIterator<Item = usize>) -> usize {
    ref_lens
        .into_iter()
        .min_by_key(|&r| (r.abs_diff(cand_len), r))
        .unwrap_or(0)
}

/// Sufficient statistics for corpus BLEU; they add across sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub cand_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn for_sentence<T: Eq + Hash>(candidate: &[T], references: &[&[T]]) -> Self {
        let mut s = BleuStats {
            cand_len: candidate.len() as u64,
            ref_len: closest_ref_len(candidate.len(), references.iter().map(|r| r.len())) as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let (m, t) = clipped_ngram_counts(candidate, references, n);
            s.matches[n - 1] = m;
            s.totals[n - 1] = t;
        }
        s
    }

    /// BLEU on a 0–100 scale.
    ///
    /// Orders for which the candidates contain no n-grams at all are left out
    /// of the geometric mean (so a corpus of three-word sentences is scored on
    /// orders 1–3); an order with n-grams but no match gives 0 unless
    /// smoothed.
    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.cand_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            let (mut m, mut t) = (self.matches[n] as f64, self.totals[n] as f64);
            if self.totals[n] == 0 {
                continue;
            }
            if smoothing == Smoothing::AddOne && n > 0 {
                m += 1.0;
                t += 1.0;
            }
            if m == 0.0 {
                return 0.0;
            }
            log_sum += (m / t).ln();
            orders += 1;
        }
        let (c, r) = (self.cand_len as f64, self.ref_len as f64);
        let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        (100.0 * bp * (log_sum / orders as f64).exp()).clamp(0.0, 100.0)
    }
}

impl std::ops::Add for BleuStats {
    type Output = BleuStats;
    fn add(mut self, o: BleuStats) -> BleuStats {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.cand_len += o.cand_len;
        self.ref_len += o.ref_len;
        self
    }
}

impl std::iter::Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::default(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn classic_clipping() {
        let cand = toks("the the the the the the the");
        let r1 = toks("the cat is on the mat");
        let r2 = toks("there is a cat on the mat");
        assert_eq!(clipped_ngram_counts(&cand, &[&r1, &r2], 1), (2, 7));
    }

    #[test]
    fn closest_reference_prefers_shorter_on_ties() {
        assert_eq!(closest_ref_len(5, [3, 7]), 3);
        assert_eq!(closest_ref_len(5, [7, 4, 6]), 4);
        assert_eq!(closest_ref_len(5, [5, 9]), 5);
    }

    #[test]
    fn identity_and_disjoint() {
        let a = toks("a dog runs");
        assert_eq!(BleuStats::for_sentence(&a, &[&a]).score(Smoothing::None), 100.0);
        let b = toks("two cats sleep");
        assert_eq!(BleuStats::for_sentence(&a, &[&b]).score(Smoothing::None), 0.0);
    }

    #[test]
    fn hand_computed_score() {
        let cand = toks("the cat sat on a mat");
        let r = toks("the cat sat on the mat");
        let s = BleuStats::for_sentence(&cand, &[&r]);
        assert_eq!(s.matches, [5, 3, 2, 1]);
        assert_eq!(s.totals, [6, 5, 4, 3]);
        // equal lengths, so no brevity penalty
        let expected = 100.0 * (5.0f64 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0).powf(0.25);
        assert!((s.score(Smoothing::None) - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_precision_and_add_one() {
        let cand = toks("a b c d e");
        let r = toks("a b x c d y e");
        let s = BleuStats::for_sentence(&cand, &[&r]);
        assert_eq!(s.matches, [5, 2, 0, 0]);
        assert_eq!(s.totals, [5, 4, 3, 2]);
        assert_eq!(s.score(Smoothing::None), 0.0);
        let expected = 100.0 * (1.0f64 - 7.0 / 5.0).exp() * (1.0f64 * 3.0 / 5.0 * 1.0 / 4.0 * 1.0 / 3.0).powf(0.25);
        assert!((s.score(Smoothing::AddOne) - expected).abs() < 1e-9);
    }

    #[test]
    fn brevity_penalty() {
        let cand = toks("a b");
        let r = toks("a b c d");
        let s = BleuStats::for_sentence(&cand, &[&r]);
        assert!((s.score(Smoothing::None) - 100.0 * (1.0f64 - 2.0).exp()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn range_and_reference_monotonicity(
            c in proptest::collection::vec(0u8..5, 0..10),
            r1 in proptest::collection::vec(0u8..5, 0..10),
            r2 in proptest::collection::vec(0u8..5, 0..10),
        ) {
            let s = BleuStats::for_sentence(&c, &[&r1]).score(Smoothing::None);
            prop_assert!((0.0..=100.0).contains(&s));
            for n in 1..=4 {
                let (one, _) = clipped_ngram_counts(&c, &[&r1], n);
                let (two, _) = clipped_ngram_counts(&c, &[&r1, &r2], n);
                prop_assert!(two >= one);
            }
        }
    }
}
