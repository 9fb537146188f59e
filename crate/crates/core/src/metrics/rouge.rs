/// Default recall weight for ROUGE-L.
pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure of `candidate` against one reference.
pub fn rouge_l_pair<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> f64 {
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Best score over the references.
pub fn rouge_l_sentence<T: PartialEq>(candidate: &[T], references: &[&[T]], beta: f64) -> f64 {
    references
        .iter()
        .map(|r| rouge_l_pair(candidate, r, beta))
        .fold(0.0, f64::max)
}
