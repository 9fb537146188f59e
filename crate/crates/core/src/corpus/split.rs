//! Seeded train/validation/test splits.
//!
//! The shuffle is bit-exact across platforms:
//!
//! 1. The generator is SplitMix64: the state advances by `0x9E3779B97F4A7C15`
//!    and each output is the state passed through
//!    `z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB; z ^ z>>31`
//!    (wrapping arithmetic). The initial state is the seed.
//! 2. Fisher-Yates runs from the last index down: for `i` in `n-1..=1`, draw
//!    `j = (next_u64() * (i + 1)) >> 64` in 128-bit arithmetic and swap `i`, `j`.
//! 3. The shuffled list is cut into `floor(N·r_train)`, `floor(N·r_val)` and the
//!    remainder, in that order.

use super::{AnnotatedRecord, CorpusError};

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in `0..bound` by multiply-shift.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Split ratios held as exact integer weights plus the shuffle seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    weights: [u128; 3],
    pub seed: u64,
}

impl SplitSpec {
    /// Builds a spec from three non-negative integer weights, e.g. `[8, 1, 1]`.
    pub fn from_weights(weights: [u64; 3], seed: u64) -> Result<Self, CorpusError> {
        let weights = weights.map(u128::from);
        if weights.iter().sum::<u128>() == 0 {
            return Err(CorpusError::InvalidSplit("ratios sum to zero".into()));
        }
        Ok(Self { weights, seed })
    }

    /// Parses `"8:1:1"` or `"0.70:0.24:0.06"` style ratios exactly. Any
    /// non-negative decimals are accepted and normalized by their sum.
    pub fn parse(ratios: &str, seed: u64) -> Result<Self, CorpusError> {
        let parts: Vec<&str> = ratios.split([':', ',']).map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CorpusError::InvalidSplit(format!(
                "expected three ratios, got {ratios:?}"
            )));
        }
        let mut decimals = Vec::with_capacity(3);
        for p in &parts {
            decimals.push(parse_decimal(p).ok_or_else(|| {
                CorpusError::InvalidSplit(format!("not a non-negative decimal: {p:?}"))
            })?);
        }
        let scale = decimals.iter().map(|(_, s)| *s).max().unwrap_or(0);
        let mut weights = [0u128; 3];
        for (w, (mantissa, s)) in weights.iter_mut().zip(&decimals) {
            *w = mantissa * 10u128.pow(scale - s);
        }
        if weights.iter().sum::<u128>() == 0 {
            return Err(CorpusError::InvalidSplit("ratios sum to zero".into()));
        }
        Ok(Self { weights, seed })
    }

    /// Sizes `(train, validation, test)` for `n` items.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total: u128 = self.weights.iter().sum();
        let n128 = n as u128;
        let train = (n128 * self.weights[0] / total) as usize;
        let val = (n128 * self.weights[1] / total) as usize;
        (train, val, n - train - val)
    }
}

/// Returns `(mantissa, decimal places)`.
fn parse_decimal(s: &str) -> Option<(u128, u32)> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 18
    {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mantissa = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    Some((mantissa, frac.len() as u32))
}

/// Three disjoint parts of one collection.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles a copy of `items` with the spec's seed and cuts it by the spec's
/// ratios.
pub fn split_items<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Split<T>, CorpusError> {
    if items.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut shuffled = items.to_vec();
    let mut rng = SplitMix64::new(spec.seed);
    for i in (1..shuffled.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        shuffled.swap(i, j);
    }
    let (train, val, _) = spec.sizes(shuffled.len());
    let test = shuffled.split_off(train + val);
    let validation = shuffled.split_off(train);
    Ok(Split {
        train: shuffled,
        validation,
        test,
    })
}

/// Splits the annotated (non-excluded) records of a dataset.
pub fn split_dataset(
    records: &[AnnotatedRecord],
    spec: &SplitSpec,
) -> Result<Split<AnnotatedRecord>, CorpusError> {
    let eligible: Vec<AnnotatedRecord> = records.iter().filter(|r| !r.is_excluded()).cloned().collect();
    split_items(&eligible, spec)
}
