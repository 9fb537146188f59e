//! Reference-based scoring of generated text.
//!
//! All metrics run over [`tokenize`]d text: corpus BLEU (clipped 1–4-gram
//! precision with a brevity penalty), ROUGE-L (LCS F-measure) and a
//! METEOR variant restricted to exact unigram matches. BLEU is reported on a
//! 0–100 scale, the other two on 0–1.

mod bleu;
mod meteor;
mod rouge;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LanguageTag;

pub use bleu::{clipped_ngram_counts, closest_ref_len, BleuStats, Smoothing, MAX_ORDER};
pub use meteor::{align, count_chunks, meteor_from_counts, meteor_pair, meteor_sentence, Alignment, SEARCH_BUDGET};
pub use rouge::{lcs_len, rouge_l_pair, rouge_l_sentence, ROUGE_BETA};
pub use tokenize::{tokenize, TokenizedSentence, TOKENIZER_ID};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{candidates} candidates but {references} reference sets")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("no candidates to score")]
    EmptyCorpus,
    #[error("candidate {0} has an empty reference set")]
    EmptyReferenceSet(String),
    #[error("ids differ between candidates and references (without references: {missing_references:?}; without candidates: {missing_candidates:?})")]
    IdMismatch {
        missing_references: Vec<String>,
        missing_candidates: Vec<String>,
    },
    #[error("unsupported metric {0:?} (available: bleu, rouge_l, meteor_lite)")]
    UnsupportedMetric(String),
    #[error("{path}: {message}")]
    MalformedInput { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bleu,
    RougeL,
    MeteorLite,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Bleu, Metric::RougeL, Metric::MeteorLite];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::RougeL => "rouge_l",
            Metric::MeteorLite => "meteor_lite",
        }
    }

    /// How the metric is computed, spelled out for the report.
    pub fn variant(self, opts: &MetricOptions) -> String {
        match self {
            Metric::Bleu => format!(
                "corpus, 1-{MAX_ORDER}-gram clipped, closest ref length, effective order, smoothing={}, 0-100",
                match opts.smoothing {
                    Smoothing::None => "none",
                    Smoothing::AddOne => "add-one",
                }
            ),
            Metric::RougeL => format!("lcs f-measure, beta={}, max over refs, corpus mean, 0-1", opts.rouge_beta),
            Metric::MeteorLite => "exact unigram matches only, fmean 10PR/(R+9P), fragmentation 0.5*(ch/m)^3, max over refs, corpus mean, 0-1"
                .to_string(),
        }
    }
}

impl FromStr for Metric {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bleu" => Ok(Metric::Bleu),
            "rouge_l" | "rougel" | "rouge" => Ok(Metric::RougeL),
            "meteor_lite" | "meteor" => Ok(Metric::MeteorLite),
            _ => Err(MetricError::UnsupportedMetric(s.trim().to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub smoothing: Smoothing,
    pub rouge_beta: f64,
    /// Include per-sentence scores in the report.
    pub per_sentence: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            smoothing: Smoothing::None,
            rouge_beta: ROUGE_BETA,
            per_sentence: false,
        }
    }
}

fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

fn check_shape(cands: &[TokenizedSentence], refs: &[Vec<TokenizedSentence>]) -> Result<(), MetricError> {
    if cands.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            candidates: cands.len(),
            references: refs.len(),
        });
    }
    if cands.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if let Some(i) = refs.iter().position(Vec::is_empty) {
        return Err(MetricError::EmptyReferenceSet(format!("#{i}")));
    }
    Ok(())
}

fn ref_slices(refs: &[TokenizedSentence]) -> Vec<&[String]> {
    refs.iter().map(|r| r.tokens.as_slice()).collect()
}

/// Corpus BLEU (0–100), unsmoothed.
pub fn bleu_corpus(cands: &[TokenizedSentence], refs: &[Vec<TokenizedSentence>]) -> Result<f64, MetricError> {
    bleu_corpus_with(cands, refs, Smoothing::None)
}

pub fn bleu_corpus_with(
    cands: &[TokenizedSentence],
    refs: &[Vec<TokenizedSentence>],
    smoothing: Smoothing,
) -> Result<f64, MetricError> {
    check_shape(cands, refs)?;
    let pairs: Vec<_> = cands.iter().zip(refs).collect();
    let stats: BleuStats = par_map(&pairs, |(c, r)| BleuStats::for_sentence(&c.tokens, &ref_slices(r)))
        .into_iter()
        .sum();
    Ok(stats.score(smoothing))
}

/// Mean sentence ROUGE-L (0–1).
pub fn rouge_l_corpus(cands: &[TokenizedSentence], refs: &[Vec<TokenizedSentence>], beta: f64) -> Result<f64, MetricError> {
    check_shape(cands, refs)?;
    let pairs: Vec<_> = cands.iter().zip(refs).collect();
    Ok(mean(&par_map(&pairs, |(c, r)| rouge_l_sentence(&c.tokens, &ref_slices(r), beta))))
}

/// Mean sentence METEOR-lite (0–1).
pub fn meteor_lite_corpus(cands: &[TokenizedSentence], refs: &[Vec<TokenizedSentence>]) -> Result<f64, MetricError> {
    check_shape(cands, refs)?;
    let pairs: Vec<_> = cands.iter().zip(refs).collect();
    Ok(mean(&par_map(&pairs, |(c, r)| meteor_sentence(&c.tokens, &ref_slices(r)))))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub id: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub beta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<RougeScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor_lite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub candidates: usize,
    pub references: usize,
    pub min_references: usize,
    pub max_references: usize,
    pub candidate_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScores {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor_lite: Option<f64>,
}

/// Scores for one candidate file against one reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tokenizer: String,
    pub metrics: MetricScores,
    pub variants: BTreeMap<String, String>,
    pub counts: EvalCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sentence: Option<Vec<SentenceScores>>,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>10}", "metric", "score");
        if let Some(b) = self.metrics.bleu {
            let _ = writeln!(s, "{:<12} {:>10.2}", "bleu", b);
        }
        if let Some(r) = &self.metrics.rouge_l {
            let _ = writeln!(s, "{:<12} {:>10.4}", "rouge_l", r.score);
        }
        if let Some(m) = self.metrics.meteor_lite {
            let _ = writeln!(s, "{:<12} {:>10.4}", "meteor_lite", m);
        }
        let _ = writeln!(
            s,
            "{} candidates, {} references, tokenizer {}",
            self.counts.candidates, self.counts.references, self.tokenizer
        );
        s
    }
}

fn undetermined() -> LanguageTag {
    LanguageTag::from_code("und").expect("valid code")
}

/// Scores candidates against references matched by id.
///
/// Every candidate id must have a reference entry and vice versa; ids must
/// be unique on each side. An empty `metrics` list means all of them.
pub fn evaluate(
    candidates: &[CandidateEntry],
    references: &[ReferenceEntry],
    metrics: &[Metric],
    opts: &MetricOptions,
) -> Result<EvalReport, MetricError> {
    let dup = |ids: &mut dyn Iterator<Item = &String>, side: &str| -> Result<(), MetricError> {
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                return Err(MetricError::MalformedInput {
                    path: side.to_string(),
                    message: format!("duplicate id {id:?}"),
                });
            }
        }
        Ok(())
    };
    dup(&mut candidates.iter().map(|c| &c.id), "candidates")?;
    dup(&mut references.iter().map(|r| &r.id), "references")?;

    let by_id: HashMap<&str, &ReferenceEntry> = references.iter().map(|r| (r.id.as_str(), r)).collect();
    let cand_ids: HashSet<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    let mut missing_references: Vec<String> =
        candidates.iter().filter(|c| !by_id.contains_key(c.id.as_str())).map(|c| c.id.clone()).collect();
    let mut missing_candidates: Vec<String> =
        references.iter().filter(|r| !cand_ids.contains(r.id.as_str())).map(|r| r.id.clone()).collect();
    if !missing_references.is_empty() || !missing_candidates.is_empty() {
        missing_references.sort();
        missing_candidates.sort();
        return Err(MetricError::IdMismatch {
            missing_references,
            missing_candidates,
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if let Some(c) = candidates.iter().find(|c| by_id[c.id.as_str()].references.is_empty()) {
        return Err(MetricError::EmptyReferenceSet(c.id.clone()));
    }

    let metrics: Vec<Metric> = if metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        let mut m = metrics.to_vec();
        m.sort();
        m.dedup();
        m
    };
    let lang = undetermined();
    let tokenized: Vec<(TokenizedSentence, Vec<TokenizedSentence>)> = par_map(candidates, |c| {
        let refs = by_id[c.id.as_str()].references.iter().map(|r| tokenize(r, &lang)).collect();
        (tokenize(&c.text, &lang), refs)
    });
    let (cands, refs): (Vec<_>, Vec<_>) = tokenized.into_iter().unzip();

    let mut scores = MetricScores::default();
    let mut variants = BTreeMap::new();
    for m in &metrics {
        variants.insert(m.name().to_string(), m.variant(opts));
        match m {
            Metric::Bleu => scores.bleu = Some(bleu_corpus_with(&cands, &refs, opts.smoothing)?),
            Metric::RougeL => {
                scores.rouge_l = Some(RougeScore {
                    beta: opts.rouge_beta,
                    score: rouge_l_corpus(&cands, &refs, opts.rouge_beta)?,
                })
            }
            Metric::MeteorLite => scores.meteor_lite = Some(meteor_lite_corpus(&cands, &refs)?),
        }
    }

    let per_sentence = opts.per_sentence.then(|| {
        let rows: Vec<usize> = (0..cands.len()).collect();
        par_map(&rows, |&i| {
            let r = ref_slices(&refs[i]);
            let c = &cands[i].tokens;
            SentenceScores {
                id: candidates[i].id.clone(),
                bleu: metrics
                    .contains(&Metric::Bleu)
                    .then(|| BleuStats::for_sentence(c, &r).score(opts.smoothing)),
                rouge_l: metrics
                    .contains(&Metric::RougeL)
                    .then(|| rouge_l_sentence(c, &r, opts.rouge_beta)),
                meteor_lite: metrics.contains(&Metric::MeteorLite).then(|| meteor_sentence(c, &r)),
            }
        })
    });

    let ref_counts = refs.iter().map(Vec::len);
    Ok(EvalReport {
        tokenizer: TOKENIZER_ID.to_string(),
        metrics: scores,
        variants,
        counts: EvalCounts {
            candidates: cands.len(),
            references: refs.iter().map(Vec::len).sum(),
            min_references: ref_counts.clone().min().unwrap_or(0),
            max_references: ref_counts.max().unwrap_or(0),
            candidate_tokens: cands.iter().map(TokenizedSentence::len).sum(),
        },
        per_sentence,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, MetricError> {
    let malformed = |message: String| MetricError::MalformedInput {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| malformed(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))
}

/// [`evaluate`] over a candidates file (`[{"id", "text"}]`) and a references
/// file (`[{"id", "references": [...]}]`).
pub fn evaluate_dataset(
    candidates: &Path,
    references: &Path,
    metrics: &[Metric],
    opts: &MetricOptions,
) -> Result<EvalReport, MetricError> {
    let c: Vec<CandidateEntry> = read_json(candidates)?;
    let r: Vec<ReferenceEntry> = read_json(references)?;
    evaluate(&c, &r, metrics, opts)
}

/// Parses metric names; `bertscore` and other unknown names are rejected.
pub fn parse_metrics<S: AsRef<str>>(names: &[S]) -> Result<Vec<Metric>, MetricError> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}
