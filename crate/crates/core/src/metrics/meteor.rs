use std::collections::HashMap;
use std::hash::Hash;

/// Node budget for the chunk-minimising search; past it the best alignment
/// found so far is used.
pub const SEARCH_BUDGET: usize = 200_000;

/// An exact-match unigram alignment: `pairs[k] = (candidate_pos, reference_pos)`,
/// sorted by candidate position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

/// Number of chunks in a candidate-ordered alignment: runs of pairs adjacent
/// in both sentences.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let continues = k > 0 && {
            let (pi, pj) = pairs[k - 1];
            pi + 1 == i && pj + 1 == j
        };
        if !continues {
            chunks += 1;
        }
    }
    chunks
}

struct Search {
    options: Vec<Vec<usize>>,
    word: Vec<usize>,
    skips: Vec<usize>,
    used: Vec<bool>,
    path: Vec<Option<usize>>,
    best: Option<(usize, Vec<Option<usize>>)>,
    nodes: usize,
}

impl Search {
    fn go(&mut self, i: usize, chunks: usize) {
        self.nodes += 1;
        if let Some((b, _)) = &self.best {
            if chunks >= *b || self.nodes > SEARCH_BUDGET {
                return;
            }
        }
        if i == self.options.len() {
            self.best = Some((chunks, self.path.clone()));
            return;
        }
        let prev = if i > 0 { self.path[i - 1] } else { None };
        let mut order: Vec<usize> = self.options[i].iter().copied().filter(|&j| !self.used[j]).collect();
        // try continuing the current chunk first
        if let Some(p) = prev {
            if let Some(pos) = order.iter().position(|&j| j == p + 1) {
                order[..=pos].rotate_right(1);
            }
        }
        for j in order {
            let extra = usize::from(j == 0 || prev != Some(j - 1));
            self.used[j] = true;
            self.path.push(Some(j));
            self.go(i + 1, chunks + extra);
            self.path.pop();
            self.used[j] = false;
        }
        let w = self.word[i];
        if self.skips[w] > 0 {
            self.skips[w] -= 1;
            self.path.push(None);
            self.go(i + 1, chunks);
            self.path.pop();
            self.skips[w] += 1;
        }
    }
}

/// Aligns exact unigram matches: as many as possible, and among those the
/// fewest chunks.
pub fn align<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Alignment {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    for t in candidate.iter().chain(reference) {
        let n = ids.len();
        ids.entry(t).or_insert(n);
    }
    let mut c_count = vec![0usize; ids.len()];
    let mut r_pos: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    let word: Vec<usize> = candidate.iter().map(|t| ids[t]).collect();
    for &w in &word {
        c_count[w] += 1;
    }
    for (j, t) in reference.iter().enumerate() {
        r_pos[ids[t]].push(j);
    }
    let skips = (0..ids.len()).map(|w| c_count[w].saturating_sub(r_pos[w].len())).collect();
    let mut s = Search {
        options: word.iter().map(|&w| r_pos[w].clone()).collect(),
        word,
        skips,
        used: vec![false; reference.len()],
        path: Vec::with_capacity(candidate.len()),
        best: None,
        nodes: 0,
    };
    s.go(0, 0);
    let path = s.best.map(|(_, p)| p).unwrap_or_default();
    let pairs: Vec<(usize, usize)> = path.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))).collect();
    Alignment {
        chunks: count_chunks(&pairs),
        pairs,
    }
}

/// Score for a given match count and chunk count.
pub fn meteor_from_counts(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

pub fn meteor_pair<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    let a = align(candidate, reference);
    meteor_from_counts(a.matches(), a.chunks, candidate.len(), reference.len())
}

/// Best score over the references.
pub fn meteor_sentence<T: Eq + Hash>(candidate: &[T], references: &[&[T]]) -> f64 {
    references.iter().map(|r| meteor_pair(candidate, r)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every maximum-size alignment, by brute force.
    fn oracle(c: &[u8], r: &[u8]) -> (usize, usize) {
        fn rec(c: &[u8], r: &[u8], i: usize, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut (usize, usize)) {
            if i == c.len() {
                let m = pairs.len();
                let ch = count_chunks(pairs);
                if m > best.0 || (m == best.0 && ch < best.1) {
                    *best = (m, ch);
                }
                return;
            }
            rec(c, r, i + 1, used, pairs, best);
            for j in 0..r.len() {
                if !used[j] && r[j] == c[i] {
                    used[j] = true;
                    pairs.push((i, j));
                    rec(c, r, i + 1, used, pairs, best);
                    pairs.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (0, 0);
        rec(c, r, 0, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn identical_four_tokens() {
        let s = ["a", "man", "is", "running"];
        assert_eq!(meteor_pair(&s, &s), 127.0 / 128.0);
    }

    #[test]
    fn reordered() {
        let c = ["the", "cat", "sat", "on", "the", "mat"];
        let r = ["on", "the", "mat", "sat", "the", "cat"];
        let a = align(&c, &r);
        assert_eq!(a.matches(), 6);
        assert_eq!(a.chunks, 3);
        assert_eq!(meteor_pair::<&str>(&[], &r), 0.0);
    }

    proptest! {
        #[test]
        fn matches_oracle(
            c in proptest::collection::vec(0u8..3, 0..7),
            r in proptest::collection::vec(0u8..3, 0..7),
        ) {
            let a = align(&c, &r);
            let (m, ch) = oracle(&c, &r);
            prop_assert_eq!((a.matches(), a.chunks), (m, ch));
            for &(i, j) in &a.pairs {
                prop_assert_eq!(c[i], r[j]);
            }
            let s = meteor_pair(&c, &r);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
