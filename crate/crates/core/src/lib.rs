//! Multilingual data annotation with a chat-completion model as the annotator.
//!
//! Starting from one gold English annotation per item, the pipeline renders a
//! task- and language-specific one-shot prompt, asks the backend for silver
//! annotations in a target language, parses the structured completion, and
//! assembles a dataset. Items whose completions keep failing are excluded after
//! a fixed number of attempts and written to a sidecar log instead.
//!
//! Around the pipeline sit the pieces needed to use the resulting data:
//! deterministic train/validation/test splits, a cost model comparing
//! human-only and assisted annotation, and native corpus-level BLEU, ROUGE-L
//! and METEOR-lite scoring against multi-reference sets.
//!
//! The modules map onto the stages:
//!
//! - [`corpus`]: items, annotations, datasets, JSON I/O and splits
//! - [`prompt`]: templates and prompt rendering
//! - [`backend`]: chat-completion transport, retries, rate limiting, worker pool
//! - [`parser`]: completion parsing and refusal detection
//! - [`annotator`]: end-to-end batch orchestration
//! - [`cost`]: per-item cost and budget coverage in exact decimal money
//! - [`metrics`]: tokenization and n-gram metrics

pub mod annotator;
pub mod backend;
pub mod corpus;
pub mod cost;
pub mod metrics;
pub mod parser;
pub mod prompt;

mod fsutil;

pub use corpus::{
    AnnotatedRecord, Annotation, AnnotationProvenance, DataItem, LanguageTag, SplitSpec,
    StylePair, Task,
};

pub use cost::{CostModel, Money};
pub use metrics::EvalReport;
pub use prompt::{PromptBundle, PromptTemplate};

/// Version string written into dataset metadata and run manifests.
pub const TOOL_VERSION: &str = concat!("annolingo ", env!("CARGO_PKG_VERSION"));
