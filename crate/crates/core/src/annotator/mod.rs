//! End-to-end annotation: prompt, complete with patience, parse, assemble.
//!
//! [`annotate_captioning`] and [`annotate_tst`] turn items into records using
//! a [`Dispatcher`]; [`run_batch`] wires a whole run from a config file,
//! writing the dataset, the exclusion log and a run manifest.

mod batch;

use thiserror::Error;

use crate::backend::{BackendError, Dispatcher, Job, Outcome, PoolError, Usage};
use crate::corpus::{
    AnnotatedRecord, Annotation, AnnotationProvenance, CorpusError, DataItem, Gold, LanguageTag, SilverAnnotations,
    SilverStylePair, SilverText, Task,
};
use crate::parser::{self, ParseError, RefusalPatterns};
use crate::prompt::{build_captioning_prompt, build_tst_prompt, PromptError, PromptTemplate};

pub use batch::{run_batch, run_batch_with, run_config, RunConfig, RunManifest, RunSummary};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("run cancelled after {completed} items")]
    Cancelled { completed: usize },
}

/// Records produced by one pass over a list of items, with the backend usage
/// it took.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRun {
    /// One record per input item, sorted by id.
    pub records: Vec<AnnotatedRecord>,
    pub usage: Usage,
    /// Backend calls made, retries included.
    pub calls: u64,
}

impl AnnotationRun {
    pub fn annotated(&self) -> usize {
        self.records.iter().filter(|r| !r.is_excluded()).count()
    }

    pub fn excluded(&self) -> usize {
        self.records.len() - self.annotated()
    }
}

fn silver_text(text: &str, lang: &LanguageTag, prov: &AnnotationProvenance, english: Option<&str>) -> Result<SilverText, String> {
    let ann = Annotation::new(text, lang.clone(), prov.clone()).map_err(|e| e.to_string())?;
    Ok(SilverText::new(ann, english.map(str::to_string)))
}

/// Turns a captioning completion into silver captions: the translation first,
/// then each paraphrase's target text with its English paraphrase alongside.
/// English-target templates yield the paraphrases themselves.
fn captioning_silver(
    raw: &str,
    gold: &Annotation,
    template: &PromptTemplate,
    prov: &AnnotationProvenance,
    patterns: &RefusalPatterns,
) -> Result<SilverAnnotations, String> {
    let lang = template.language();
    let n = template.paraphrase_count();
    let mut out = Vec::with_capacity(n + 1);
    if template.is_monolingual() {
        for p in parser::parse_monolingual_with(raw, n, patterns).map_err(|e| e.to_string())? {
            out.push(silver_text(&p, &lang, prov, None)?);
        }
    } else {
        let parse = parser::parse_captioning_with(raw, n, patterns).map_err(|e| e.to_string())?;
        parser::check_translation(&parse, gold.text()).map_err(|e| e.to_string())?;
        out.push(silver_text(&parse.translation, &lang, prov, None)?);
        for p in &parse.paraphrases {
            out.push(silver_text(&p.target, &lang, prov, Some(&p.english))?);
        }
    }
    Ok(SilverAnnotations::Captions(out))
}

/// Turns a style-transfer completion into target-language pairs: the
/// translated input pair first, then each translated paraphrase pair with its
/// English paraphrases alongside.
fn tst_silver(
    raw: &str,
    template: &PromptTemplate,
    prov: &AnnotationProvenance,
    patterns: &RefusalPatterns,
) -> Result<SilverAnnotations, String> {
    let lang = template.language();
    let parse = parser::parse_tst_with(raw, template.paraphrase_count(), patterns).map_err(|e| e.to_string())?;
    if !parse.translation_language.eq_ignore_ascii_case(lang.display_name()) {
        return Err(ParseError::LanguageMismatch {
            expected: lang.display_name().to_string(),
            found: parse.translation_language,
        }
        .to_string());
    }
    let mut pairs = Vec::with_capacity(parse.translations.len());
    for (k, t) in parse.translations.iter().enumerate() {
        let english = k.checked_sub(1).map(|i| &parse.paraphrases[i]);
        pairs.push(SilverStylePair {
            informal: silver_text(&t.informal, &lang, prov, english.map(|e| e.informal.as_str()))?,
            formal: silver_text(&t.formal, &lang, prov, english.map(|e| e.formal.as_str()))?,
        });
    }
    Ok(SilverAnnotations::StylePairs(pairs))
}

fn run(
    items: &[DataItem],
    template: &PromptTemplate,
    dispatcher: &Dispatcher,
    patterns: &RefusalPatterns,
    cancel: Option<&std::sync::atomic::AtomicBool>,
) -> Result<AnnotationRun, AnnotateError> {
    template.validate()?;
    let prov = AnnotationProvenance::silver(&dispatcher.config().model_id, &template.id)?;
    let mut jobs = Vec::with_capacity(items.len());
    for item in items {
        let bundle = match &item.gold {
            Gold::Caption(a) => build_captioning_prompt(template, a)?,
            Gold::StylePair(p) => build_tst_prompt(template, p)?,
        };
        jobs.push(Job {
            id: item.id.clone(),
            bundle,
        });
    }
    let validate = |index: usize, raw: &str| -> Result<SilverAnnotations, String> {
        match &items[index].gold {
            Gold::Caption(gold) => captioning_silver(raw, gold, template, &prov, patterns),
            Gold::StylePair(_) => tst_silver(raw, template, &prov, patterns),
        }
    };
    let results = match dispatcher.run_pool(&jobs, validate, cancel) {
        Ok(r) => r,
        Err(PoolError::DuplicateJobId(id)) => return Err(CorpusError::DuplicateId(id).into()),
        Err(PoolError::Aborted { completed }) => {
            return Err(AnnotateError::Cancelled {
                completed: completed.len(),
            })
        }
    };

    let mut out = AnnotationRun {
        records: Vec::with_capacity(results.len()),
        usage: Usage::default(),
        calls: 0,
    };
    for r in results {
        out.usage += r.outcome.usage();
        out.calls += u64::from(r.outcome.attempts());
        let item = items[r.index].clone();
        out.records.push(match r.outcome {
            Outcome::Success { value, .. } => AnnotatedRecord::annotated(item, value),
            Outcome::Excluded {
                attempts, last_error, ..
            } => AnnotatedRecord::excluded(item, attempts, last_error),
        });
    }
    Ok(out)
}

fn expect_task(items: &[DataItem], template: &PromptTemplate, task: Task) -> Result<(), AnnotateError> {
    if template.task != task {
        return Err(PromptError::TaskMismatch {
            id: template.id.clone(),
            expected: task,
            found: template.task,
        }
        .into());
    }
    if let Some(item) = items.iter().find(|i| i.task() != task) {
        return Err(AnnotateError::Config(format!("item {:?} is not a {task} item", item.id)));
    }
    Ok(())
}

/// Annotates captioning items: each successful record carries the
/// translation and the `n` translated paraphrases (just the `n` paraphrases
/// for English-target templates).
pub fn annotate_captioning(
    items: &[DataItem],
    template: &PromptTemplate,
    dispatcher: &Dispatcher,
) -> Result<AnnotationRun, AnnotateError> {
    expect_task(items, template, Task::Captioning)?;
    run(items, template, dispatcher, &RefusalPatterns::default(), None)
}

/// Annotates style-transfer items: each successful record carries the
/// translated input pair and the translated paraphrase pair(s).
pub fn annotate_tst(
    items: &[DataItem],
    template: &PromptTemplate,
    dispatcher: &Dispatcher,
) -> Result<AnnotationRun, AnnotateError> {
    expect_task(items, template, Task::StyleTransfer)?;
    run(items, template, dispatcher, &RefusalPatterns::default(), None)
}

/// Either task, with custom refusal patterns and an optional cancel flag.
pub fn annotate(
    items: &[DataItem],
    template: &PromptTemplate,
    dispatcher: &Dispatcher,
    patterns: &RefusalPatterns,
    cancel: Option<&std::sync::atomic::AtomicBool>,
) -> Result<AnnotationRun, AnnotateError> {
    expect_task(items, template, template.task)?;
    run(items, template, dispatcher, patterns, cancel)
}

#[cfg(test)]
mod tests;
