//! JSON input corpora, output datasets and the exclusion log.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    AnnotatedRecord, Annotation, AnnotationProvenance, CorpusError, DataItem, Gold, LanguageTag,
    SilverAnnotations, SilverStylePair, SilverText, StylePair, Task,
};
use crate::fsutil::write_atomic;

#[derive(Debug, Deserialize)]
struct CaptionInput {
    id: String,
    #[serde(default)]
    content_ref: Option<String>,
    #[serde(default)]
    gold_caption: Option<String>,
}

#[derive(Debug, Deserialize)]
struct StyleInput {
    id: String,
    #[serde(default)]
    informal: Option<String>,
    #[serde(default)]
    formal: Option<String>,
}

/// Dataset-wide metadata repeated on every output record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: Task,
    pub target_language: LanguageTag,
    pub created_at: String,
    pub tool_version: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TextWire {
    text: String,
    language: LanguageTag,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum GoldWire {
    Caption(TextWire),
    Pair { informal: TextWire, formal: TextWire },
}

#[derive(Debug, Serialize, Deserialize)]
struct SilverTextWire {
    text: String,
    language: LanguageTag,
    generator: String,
    prompt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    english_intermediate: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SilverWire {
    Pair {
        informal: SilverTextWire,
        formal: SilverTextWire,
    },
    Caption(SilverTextWire),
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordWire {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content_ref: Option<String>,
    gold: GoldWire,
    silver: Vec<SilverWire>,
    meta: DatasetMeta,
}

/// One line of the exclusion log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionEntry {
    pub id: String,
    pub attempts: u32,
    pub last_error: String,
}

/// A dataset file read back from disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub meta: Option<DatasetMeta>,
    pub records: Vec<AnnotatedRecord>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_array(path: &Path) -> Result<Vec<Value>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str::<Vec<Value>>(&text).map_err(|e| CorpusError::MalformedInput {
        record: None,
        line: Some(e.line()),
        message: e.to_string(),
    })
}

fn malformed(record: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::MalformedInput {
        record: Some(record),
        line: None,
        message: message.into(),
    }
}

fn gold_text(record: usize, id: &str, raw: Option<String>) -> Result<Annotation, CorpusError> {
    let raw = raw.unwrap_or_default();
    let text = raw.trim();
    if text.is_empty() {
        return Err(CorpusError::MissingGold {
            record,
            id: id.to_string(),
        });
    }
    Annotation::gold_english(text).map_err(|e| malformed(record, e.to_string()))
}

/// Reads an input corpus: a top-level JSON array of captioning or
/// style-transfer records. Gold text is trimmed and tagged English.
pub fn load_corpus(path: &Path, task: Task) -> Result<Vec<DataItem>, CorpusError> {
    let values = read_array(path)?;
    let mut seen = HashSet::new();
    let mut items = Vec::with_capacity(values.len());
    for (idx, value) in values.into_iter().enumerate() {
        let item = match task {
            Task::Captioning => {
                let rec: CaptionInput =
                    serde_json::from_value(value).map_err(|e| malformed(idx, e.to_string()))?;
                let gold = gold_text(idx, &rec.id, rec.gold_caption)?;
                DataItem {
                    id: rec.id,
                    content_ref: rec.content_ref,
                    gold: Gold::Caption(gold),
                }
            }
            Task::StyleTransfer => {
                let rec: StyleInput =
                    serde_json::from_value(value).map_err(|e| malformed(idx, e.to_string()))?;
                let informal = gold_text(idx, &rec.id, rec.informal)?;
                let formal = gold_text(idx, &rec.id, rec.formal)?;
                DataItem {
                    id: rec.id,
                    content_ref: None,
                    gold: Gold::StylePair(StylePair::new(informal, formal)?),
                }
            }
        };
        if item.id.is_empty() {
            return Err(malformed(idx, "empty id"));
        }
        if !seen.insert(item.id.clone()) {
            return Err(CorpusError::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(items)
}

fn silver_wire(s: &SilverText) -> SilverTextWire {
    let a = &s.annotation;
    SilverTextWire {
        text: a.text().to_string(),
        language: a.language().clone(),
        generator: a.provenance().generator().unwrap_or_default().to_string(),
        prompt_id: a.provenance().prompt_id().unwrap_or_default().to_string(),
        english_intermediate: s.english_intermediate.clone(),
    }
}

fn record_wire(rec: &AnnotatedRecord, meta: &DatasetMeta) -> RecordWire {
    let text = |a: &Annotation| TextWire {
        text: a.text().to_string(),
        language: a.language().clone(),
    };
    let gold = match &rec.item.gold {
        Gold::Caption(a) => GoldWire::Caption(text(a)),
        Gold::StylePair(p) => GoldWire::Pair {
            informal: text(p.informal()),
            formal: text(p.formal()),
        },
    };
    let silver = match &rec.silver {
        SilverAnnotations::Captions(v) => v.iter().map(|s| SilverWire::Caption(silver_wire(s))).collect(),
        SilverAnnotations::StylePairs(v) => v
            .iter()
            .map(|p| SilverWire::Pair {
                informal: silver_wire(&p.informal),
                formal: silver_wire(&p.formal),
            })
            .collect(),
    };
    RecordWire {
        id: rec.item.id.clone(),
        content_ref: rec.item.content_ref.clone(),
        gold,
        silver,
        meta: meta.clone(),
    }
}

/// Writes the non-excluded records, sorted by id, as the dataset file and the
/// excluded ones as JSON lines to `exclusion_path`. Both files are replaced
/// atomically.
pub fn save_dataset(
    records: &[AnnotatedRecord],
    meta: &DatasetMeta,
    path: &Path,
    exclusion_path: &Path,
) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for rec in records {
        rec.validate(None)?;
        if !seen.insert(rec.id()) {
            return Err(CorpusError::DuplicateId(rec.id().to_string()));
        }
    }
    let mut kept: Vec<&AnnotatedRecord> = records.iter().filter(|r| !r.is_excluded()).collect();
    kept.sort_by(|a, b| a.id().cmp(b.id()));
    let mut dropped: Vec<&AnnotatedRecord> = records.iter().filter(|r| r.is_excluded()).collect();
    dropped.sort_by(|a, b| a.id().cmp(b.id()));

    let wires: Vec<RecordWire> = kept.iter().map(|r| record_wire(r, meta)).collect();
    let mut body = serde_json::to_string_pretty(&wires).expect("dataset serializes");
    body.push('\n');

    let mut log = String::new();
    for rec in dropped {
        let ex = rec.exclusion.as_ref().expect("filtered on exclusion");
        let entry = ExclusionEntry {
            id: rec.id().to_string(),
            attempts: ex.attempts,
            last_error: ex.reason.clone(),
        };
        log.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        log.push('\n');
    }

    write_atomic(path, body.as_bytes()).map_err(io_err(path))?;
    write_atomic(exclusion_path, log.as_bytes()).map_err(io_err(exclusion_path))?;
    Ok(())
}

fn silver_from_wire(idx: usize, w: SilverTextWire) -> Result<SilverText, CorpusError> {
    let prov =
        AnnotationProvenance::silver(&w.generator, &w.prompt_id).map_err(|e| malformed(idx, e.to_string()))?;
    let ann = Annotation::new(&w.text, w.language, prov).map_err(|e| malformed(idx, e.to_string()))?;
    Ok(SilverText::new(ann, w.english_intermediate))
}

fn gold_from_wire(idx: usize, t: TextWire) -> Result<Annotation, CorpusError> {
    Annotation::new(&t.text, t.language, AnnotationProvenance::gold()).map_err(|e| malformed(idx, e.to_string()))
}

fn record_from_value(idx: usize, value: Value) -> Result<(AnnotatedRecord, DatasetMeta), CorpusError> {
    let wire: RecordWire = serde_json::from_value(value).map_err(|e| malformed(idx, e.to_string()))?;
    let gold = match wire.gold {
        GoldWire::Caption(t) => Gold::Caption(gold_from_wire(idx, t)?),
        GoldWire::Pair { informal, formal } => Gold::StylePair(StylePair::new(
            gold_from_wire(idx, informal)?,
            gold_from_wire(idx, formal)?,
        )?),
    };
    let task = gold.task();
    let mut captions = Vec::new();
    let mut pairs = Vec::new();
    for s in wire.silver {
        match (s, task) {
            (SilverWire::Caption(w), Task::Captioning) => captions.push(silver_from_wire(idx, w)?),
            (SilverWire::Pair { informal, formal }, Task::StyleTransfer) => pairs.push(SilverStylePair {
                informal: silver_from_wire(idx, informal)?,
                formal: silver_from_wire(idx, formal)?,
            }),
            _ => return Err(malformed(idx, "silver entry does not match the gold task")),
        }
    }
    let silver = match task {
        Task::Captioning => SilverAnnotations::Captions(captions),
        Task::StyleTransfer => SilverAnnotations::StylePairs(pairs),
    };
    let item = DataItem {
        id: wire.id,
        content_ref: wire.content_ref,
        gold,
    };
    let rec = AnnotatedRecord::annotated(item, silver);
    rec.validate(None)?;
    Ok((rec, wire.meta))
}

/// Reads a dataset written by [`save_dataset`] and checks every record.
pub fn load_dataset(path: &Path) -> Result<Dataset, CorpusError> {
    let values = read_array(path)?;
    let mut seen = HashSet::new();
    let mut meta = None;
    let mut records = Vec::with_capacity(values.len());
    for (idx, value) in values.into_iter().enumerate() {
        let (rec, m) = record_from_value(idx, value)?;
        if !seen.insert(rec.item.id.clone()) {
            return Err(CorpusError::DuplicateId(rec.item.id));
        }
        meta.get_or_insert(m);
        records.push(rec);
    }
    Ok(Dataset { meta, records })
}

/// Every problem found in a dataset file, rather than just the first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetCheck {
    pub records: usize,
    pub violations: Vec<String>,
}

/// Checks each record of a dataset file independently, plus id uniqueness
/// and that all records agree on task and target language. Only an
/// unreadable file is an error.
pub fn check_dataset(path: &Path) -> Result<DatasetCheck, CorpusError> {
    let values = read_array(path)?;
    let mut out = DatasetCheck {
        records: values.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut first: Option<DatasetMeta> = None;
    for (idx, value) in values.into_iter().enumerate() {
        match record_from_value(idx, value) {
            Ok((rec, meta)) => {
                if !seen.insert(rec.item.id.clone()) {
                    out.violations.push(CorpusError::DuplicateId(rec.item.id.clone()).to_string());
                }
                match &first {
                    None => first = Some(meta),
                    Some(f) if f.task != meta.task || f.target_language != meta.target_language => {
                        out.violations.push(format!(
                            "record {idx} ({:?}) is {} into {}, earlier records are {} into {}",
                            rec.item.id,
                            meta.task,
                            meta.target_language.code(),
                            f.task,
                            f.target_language.code()
                        ));
                    }
                    Some(_) => {}
                }
            }
            Err(e) => out.violations.push(e.to_string()),
        }
    }
    Ok(out)
}

/// Writes records (none of them excluded) as a dataset file, sorted by id.
pub fn write_records(records: &[AnnotatedRecord], meta: &DatasetMeta, path: &Path) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for rec in records {
        rec.validate(None)?;
        if rec.is_excluded() {
            return Err(CorpusError::InvariantViolation {
                id: rec.id().to_string(),
                reason: "excluded records belong in the exclusion log".into(),
            });
        }
        if !seen.insert(rec.id()) {
            return Err(CorpusError::DuplicateId(rec.id().to_string()));
        }
    }
    let mut sorted: Vec<&AnnotatedRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    let wires: Vec<RecordWire> = sorted.iter().map(|r| record_wire(r, meta)).collect();
    let mut body = serde_json::to_string_pretty(&wires).expect("dataset serializes");
    body.push('\n');
    write_atomic(path, body.as_bytes()).map_err(io_err(path))
}

/// Reads an exclusion log. A missing file is an empty log.
pub fn load_exclusions(path: &Path) -> Result<Vec<ExclusionEntry>, CorpusError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::MalformedInput {
                record: None,
                line: Some(i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}
