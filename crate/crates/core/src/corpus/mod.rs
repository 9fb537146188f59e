//! Items, annotations and datasets.
//!
//! A [`DataItem`] carries one gold English annotation (a caption, or an
//! informal/formal pair for style transfer). Annotating it produces an
//! [`AnnotatedRecord`] holding the silver annotations generated in the target
//! language, or an [`Exclusion`] when generation kept failing.

mod io;
mod split;

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use io::{
    check_dataset, load_corpus, load_dataset, load_exclusions, save_dataset, write_records, Dataset,
    DatasetCheck, DatasetMeta, ExclusionEntry,
};
pub use split::{split_dataset, split_items, Split, SplitMix64, SplitSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input{}: {message}", location(.record, .line))]
    MalformedInput {
        record: Option<usize>,
        line: Option<usize>,
        message: String,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("record {record} ({id:?}) has no gold annotation")]
    MissingGold { record: usize, id: String },
    #[error("invariant violated by record {id:?}: {reason}")]
    InvariantViolation { id: String, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid split specification: {0}")]
    InvalidSplit(String),
    #[error("invalid language tag {0:?}")]
    InvalidLanguage(String),
    #[error("invalid annotation text: {0}")]
    InvalidAnnotation(String),
}

fn location(record: &Option<usize>, line: &Option<usize>) -> String {
    match (record, line) {
        (Some(r), _) => format!(" at record {r}"),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

/// The two annotation tasks the pipeline knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "captioning")]
    Captioning,
    #[serde(rename = "tst", alias = "style_transfer")]
    StyleTransfer,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Captioning => "captioning",
            Task::StyleTransfer => "tst",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "captioning" | "caption" => Ok(Task::Captioning),
            "tst" | "style_transfer" | "style-transfer" => Ok(Task::StyleTransfer),
            other => Err(format!("unknown task {other:?} (expected captioning or tst)")),
        }
    }
}

const KNOWN_LANGUAGES: &[(&str, &str)] = &[
    ("de", "German"),
    ("en", "English"),
    ("es", "Spanish"),
    ("et", "Estonian"),
    ("eu", "Basque"),
    ("fi", "Finnish"),
    ("fr", "French"),
    ("it", "Italian"),
    ("ja", "Japanese"),
    ("ko", "Korean"),
    ("lv", "Latvian"),
    ("mi", "Māori"),
    ("pl", "Polish"),
    ("pt", "Portuguese"),
    ("vi", "Vietnamese"),
    ("zh", "Chinese"),
];

/// A language identifier plus the name used for it inside prompts.
///
/// Two tags are equal when their codes are equal; the display name is
/// presentation only. On the wire a tag is just its code.
#[derive(Debug, Clone)]
pub struct LanguageTag {
    code: String,
    display_name: String,
}

impl LanguageTag {
    pub fn new(code: &str, display_name: &str) -> Result<Self, CorpusError> {
        if !is_valid_code(code) || display_name.trim().is_empty() {
            return Err(CorpusError::InvalidLanguage(code.to_string()));
        }
        Ok(Self {
            code: code.to_string(),
            display_name: display_name.trim().to_string(),
        })
    }

    /// Builds a tag from its code, taking the display name from the built-in
    /// table, or the code itself for languages the table does not list.
    pub fn from_code(code: &str) -> Result<Self, CorpusError> {
        let display = KNOWN_LANGUAGES
            .iter()
            .find(|(c, _)| *c == code)
            .map(|(_, name)| *name)
            .unwrap_or(code);
        Self::new(code, display)
    }

    pub fn english() -> Self {
        Self {
            code: "en".into(),
            display_name: "English".into(),
        }
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }

    pub fn is_english(&self) -> bool {
        self.code == "en"
    }
}

fn is_valid_code(code: &str) -> bool {
    let mut parts = code.split('-');
    let primary = parts.next().unwrap_or("");
    (2..=8).contains(&primary.len())
        && primary.bytes().all(|b| b.is_ascii_lowercase())
        && parts.all(|p| (1..=8).contains(&p.len()) && p.bytes().all(|b| b.is_ascii_alphanumeric()))
}

impl PartialEq for LanguageTag {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl Eq for LanguageTag {}

impl Hash for LanguageTag {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.code.hash(state);
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

impl Serialize for LanguageTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.code)
    }
}

impl<'de> Deserialize<'de> for LanguageTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        LanguageTag::from_code(&code).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProvenanceKind {
    Gold,
    Silver,
}

/// Where an annotation came from: a human (gold) or a model run (silver).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationProvenance {
    kind: ProvenanceKind,
    generator: Option<String>,
    prompt_id: Option<String>,
}

impl AnnotationProvenance {
    pub fn gold() -> Self {
        Self {
            kind: ProvenanceKind::Gold,
            generator: None,
            prompt_id: None,
        }
    }

    pub fn silver(generator: &str, prompt_id: &str) -> Result<Self, CorpusError> {
        if generator.trim().is_empty() || prompt_id.trim().is_empty() {
            return Err(CorpusError::InvalidAnnotation(
                "silver provenance needs a generator and a prompt id".into(),
            ));
        }
        Ok(Self {
            kind: ProvenanceKind::Silver,
            generator: Some(generator.to_string()),
            prompt_id: Some(prompt_id.to_string()),
        })
    }

    pub fn kind(&self) -> ProvenanceKind {
        self.kind
    }

    pub fn generator(&self) -> Option<&str> {
        self.generator.as_deref()
    }

    pub fn prompt_id(&self) -> Option<&str> {
        self.prompt_id.as_deref()
    }

    pub fn is_gold(&self) -> bool {
        self.kind == ProvenanceKind::Gold
    }
}

/// One piece of annotation text.
///
/// The text is non-empty, has no surrounding whitespace and is a single line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    text: String,
    language: LanguageTag,
    provenance: AnnotationProvenance,
}

impl Annotation {
    pub fn new(
        text: &str,
        language: LanguageTag,
        provenance: AnnotationProvenance,
    ) -> Result<Self, CorpusError> {
        check_text(text)?;
        Ok(Self {
            text: text.to_string(),
            language,
            provenance,
        })
    }

    pub fn gold_english(text: &str) -> Result<Self, CorpusError> {
        Self::new(text, LanguageTag::english(), AnnotationProvenance::gold())
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn language(&self) -> &LanguageTag {
        &self.language
    }

    pub fn provenance(&self) -> &AnnotationProvenance {
        &self.provenance
    }
}

fn check_text(text: &str) -> Result<(), CorpusError> {
    if text.is_empty() {
        return Err(CorpusError::InvalidAnnotation("empty text".into()));
    }
    if text.trim() != text {
        return Err(CorpusError::InvalidAnnotation(format!(
            "surrounding whitespace in {text:?}"
        )));
    }
    if text.contains(['\n', '\r']) {
        return Err(CorpusError::InvalidAnnotation(format!("line break in {text:?}")));
    }
    Ok(())
}

/// An informal/formal pair in one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StylePair {
    informal: Annotation,
    formal: Annotation,
}

impl StylePair {
    pub fn new(informal: Annotation, formal: Annotation) -> Result<Self, CorpusError> {
        if informal.language != formal.language {
            return Err(CorpusError::InvalidAnnotation(format!(
                "style pair mixes languages {} and {}",
                informal.language, formal.language
            )));
        }
        Ok(Self { informal, formal })
    }

    pub fn informal(&self) -> &Annotation {
        &self.informal
    }

    pub fn formal(&self) -> &Annotation {
        &self.formal
    }

    pub fn language(&self) -> &LanguageTag {
        &self.informal.language
    }
}

/// The human annotation an item starts from. Always English.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    Caption(Annotation),
    StylePair(StylePair),
}

impl Gold {
    pub fn task(&self) -> Task {
        match self {
            Gold::Caption(_) => Task::Captioning,
            Gold::StylePair(_) => Task::StyleTransfer,
        }
    }

    fn annotations(&self) -> Vec<&Annotation> {
        match self {
            Gold::Caption(a) => vec![a],
            Gold::StylePair(p) => vec![&p.informal, &p.formal],
        }
    }
}

/// One unlabeled unit plus its gold English annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataItem {
    pub id: String,
    /// Opaque reference to the content (an image path or URL); absent for
    /// style transfer.
    pub content_ref: Option<String>,
    pub gold: Gold,
}

impl DataItem {
    pub fn captioning(id: &str, content_ref: Option<&str>, caption: &str) -> Result<Self, CorpusError> {
        Self::with_gold(id, content_ref, Gold::Caption(Annotation::gold_english(caption)?))
    }

    pub fn style_transfer(id: &str, informal: &str, formal: &str) -> Result<Self, CorpusError> {
        let pair = StylePair::new(
            Annotation::gold_english(informal)?,
            Annotation::gold_english(formal)?,
        )?;
        Self::with_gold(id, None, Gold::StylePair(pair))
    }

    fn with_gold(id: &str, content_ref: Option<&str>, gold: Gold) -> Result<Self, CorpusError> {
        if id.is_empty() {
            return Err(CorpusError::InvalidAnnotation("empty item id".into()));
        }
        let item = Self {
            id: id.to_string(),
            content_ref: content_ref.map(str::to_string),
            gold,
        };
        item.check_gold()?;
        Ok(item)
    }

    pub fn task(&self) -> Task {
        self.gold.task()
    }

    pub(crate) fn check_gold(&self) -> Result<(), CorpusError> {
        for a in self.gold.annotations() {
            if !a.language.is_english() || !a.provenance.is_gold() {
                return Err(CorpusError::InvariantViolation {
                    id: self.id.clone(),
                    reason: "gold annotations must be English with gold provenance".into(),
                });
            }
        }
        Ok(())
    }
}

/// A silver annotation plus the English sentence it was generated alongside,
/// when the model produced one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilverText {
    pub annotation: Annotation,
    pub english_intermediate: Option<String>,
}

impl SilverText {
    pub fn new(annotation: Annotation, english_intermediate: Option<String>) -> Self {
        Self {
            annotation,
            english_intermediate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilverStylePair {
    pub informal: SilverText,
    pub formal: SilverText,
}

/// The generated annotations of a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SilverAnnotations {
    Captions(Vec<SilverText>),
    StylePairs(Vec<SilverStylePair>),
}

impl SilverAnnotations {
    pub fn len(&self) -> usize {
        match self {
            SilverAnnotations::Captions(v) => v.len(),
            SilverAnnotations::StylePairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn empty_for(task: Task) -> Self {
        match task {
            Task::Captioning => SilverAnnotations::Captions(Vec::new()),
            Task::StyleTransfer => SilverAnnotations::StylePairs(Vec::new()),
        }
    }

    pub fn texts(&self) -> Vec<&SilverText> {
        match self {
            SilverAnnotations::Captions(v) => v.iter().collect(),
            SilverAnnotations::StylePairs(v) => v.iter().flat_map(|p| [&p.informal, &p.formal]).collect(),
        }
    }
}

/// Why an item was dropped from the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub attempts: u32,
    pub reason: String,
}

/// An item together with its silver annotations, or the reason it has none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRecord {
    pub item: DataItem,
    pub silver: SilverAnnotations,
    pub exclusion: Option<Exclusion>,
}

impl AnnotatedRecord {
    pub fn annotated(item: DataItem, silver: SilverAnnotations) -> Self {
        Self {
            item,
            silver,
            exclusion: None,
        }
    }

    pub fn excluded(item: DataItem, attempts: u32, reason: impl Into<String>) -> Self {
        let silver = SilverAnnotations::empty_for(item.task());
        Self {
            item,
            silver,
            exclusion: Some(Exclusion {
                attempts,
                reason: reason.into(),
            }),
        }
    }

    pub fn is_excluded(&self) -> bool {
        self.exclusion.is_some()
    }

    pub fn exclusion_reason(&self) -> Option<&str> {
        self.exclusion.as_ref().map(|e| e.reason.as_str())
    }

    pub fn id(&self) -> &str {
        &self.item.id
    }

    /// Checks the record-level invariants, optionally against the number of
    /// silver entries the run requested.
    pub fn validate(&self, expected_silver: Option<usize>) -> Result<(), CorpusError> {
        let fail = |reason: String| CorpusError::InvariantViolation {
            id: self.item.id.clone(),
            reason,
        };
        self.item.check_gold()?;
        if self.silver.task_mismatch(self.item.task()) {
            return Err(fail("silver annotations do not match the item task".into()));
        }
        match &self.exclusion {
            Some(e) => {
                if !self.silver.is_empty() {
                    return Err(fail("excluded record carries silver annotations".into()));
                }
                if e.reason.is_empty() {
                    return Err(fail("excluded record without a reason".into()));
                }
            }
            None => {
                if self.silver.is_empty() {
                    return Err(fail("record has no silver annotations and is not excluded".into()));
                }
                if let Some(n) = expected_silver {
                    if self.silver.len() != n {
                        return Err(fail(format!(
                            "expected {n} silver entries, found {}",
                            self.silver.len()
                        )));
                    }
                }
            }
        }
        for s in self.silver.texts() {
            let p = s.annotation.provenance();
            if p.is_gold() || p.generator().is_none() || p.prompt_id().is_none() {
                return Err(fail("silver annotation without complete provenance".into()));
            }
        }
        if let SilverAnnotations::StylePairs(pairs) = &self.silver {
            if pairs.iter().any(|p| p.informal.annotation.language != p.formal.annotation.language) {
                return Err(fail("style pair mixes languages".into()));
            }
        }
        Ok(())
    }
}

impl SilverAnnotations {
    fn task_mismatch(&self, task: Task) -> bool {
        matches!(
            (self, task),
            (SilverAnnotations::Captions(_), Task::StyleTransfer)
                | (SilverAnnotations::StylePairs(_), Task::Captioning)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_codes() {
        assert!(LanguageTag::new("ko", "Korean").is_ok());
        assert!(LanguageTag::new("pt-BR", "Brazilian Portuguese").is_ok());
        assert!(LanguageTag::new("KO", "Korean").is_err());
        assert!(LanguageTag::new("", "x").is_err());
        assert!(LanguageTag::new("ko", " ").is_err());
        assert_eq!(LanguageTag::from_code("lv").unwrap().display_name(), "Latvian");
        assert_eq!(LanguageTag::from_code("xx").unwrap().display_name(), "xx");
        assert_eq!(
            LanguageTag::new("fr", "Français").unwrap(),
            LanguageTag::from_code("fr").unwrap()
        );
    }

    #[test]
    fn annotation_text_rules() {
        assert!(Annotation::gold_english("A dog.").is_ok());
        assert!(Annotation::gold_english("").is_err());
        assert!(Annotation::gold_english(" A dog.").is_err());
        assert!(Annotation::gold_english("A\ndog.").is_err());
    }

    #[test]
    fn silver_provenance_requires_fields() {
        assert!(AnnotationProvenance::silver("gpt-4-0314", "captioning-ko").is_ok());
        assert!(AnnotationProvenance::silver("", "captioning-ko").is_err());
        assert!(AnnotationProvenance::gold().generator().is_none());
    }

    #[test]
    fn style_pair_languages_must_match() {
        let en = Annotation::gold_english("hi").unwrap();
        let fr = Annotation::new(
            "salut",
            LanguageTag::from_code("fr").unwrap(),
            AnnotationProvenance::silver("m", "p").unwrap(),
        )
        .unwrap();
        assert!(StylePair::new(en, fr).is_err());
    }

    #[test]
    fn gold_must_be_english() {
        let ko = Annotation::new(
            "개가 뛴다.",
            LanguageTag::from_code("ko").unwrap(),
            AnnotationProvenance::gold(),
        )
        .unwrap();
        let err = DataItem::with_gold("x", None, Gold::Caption(ko)).unwrap_err();
        assert!(matches!(err, CorpusError::InvariantViolation { .. }));
    }

    #[test]
    fn exclusion_invariant() {
        let item = DataItem::captioning("a", None, "A dog.").unwrap();
        let rec = AnnotatedRecord::excluded(item.clone(), 3, "parse failure");
        assert!(rec.is_excluded());
        rec.validate(Some(5)).unwrap();

        let empty = AnnotatedRecord::annotated(item, SilverAnnotations::Captions(vec![]));
        assert!(empty.validate(None).is_err());
    }
}
