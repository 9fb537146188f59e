//! Prompt templates and rendering.
//!
//! A template is data: a system text with `{{name}}` placeholders, a one-shot
//! example whose output is in the exact format the parser accepts, and lists of
//! style and safety directives. Rendering is pure.
//!
//! Recognized placeholders:
//!
//! | name | value |
//! |------|-------|
//! | `language` | target language display name |
//! | `n_paraphrases` | requested paraphrase count |
//! | `task_summary` | one-line summary of what is generated (captioning) |
//! | `task_instruction` | the translation/paraphrase request (captioning) |
//! | `style_directives` | style directives, one per line |
//! | `safety_directives` | safety directives, one per line |
//! | `one_shot_input` | example input |
//! | `one_shot_output` | example output, cut to the requested count |
//!
//! A line holding only a placeholder whose value is empty is dropped.

mod registry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotation, LanguageTag, StylePair, Task};
use crate::parser;

pub use registry::TemplateRegistry;

const PLACEHOLDERS: &[&str] = &[
    "language",
    "n_paraphrases",
    "task_summary",
    "task_instruction",
    "style_directives",
    "safety_directives",
    "one_shot_input",
    "one_shot_output",
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template id {0:?} is already registered")]
    DuplicateTemplateId(String),
    #[error("malformed template {id:?}: {reason}")]
    MalformedTemplate { id: String, reason: String },
    #[error("template {id:?} is for {found}, not {expected}")]
    TaskMismatch { id: String, expected: Task, found: Task },
    #[error("gold annotation must be English, got {0}")]
    NonEnglishGold(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub code: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneShot {
    pub input: String,
    pub output: String,
}

/// A task- and language-specific prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub task: Task,
    pub target_language: LanguageSpec,
    #[serde(default)]
    pub n_paraphrases: Option<usize>,
    pub system_text: String,
    pub one_shot: OneShot,
    #[serde(default)]
    pub style_directives: Vec<String>,
    #[serde(default)]
    pub safety_directives: Vec<String>,
}

/// The fully rendered messages for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    pub template_id: String,
}

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        toml::from_str(text).map_err(|e| PromptError::MalformedTemplate {
            id: "<unparsed>".into(),
            reason: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PromptError> {
        serde_json::from_str(text).map_err(|e| PromptError::MalformedTemplate {
            id: "<unparsed>".into(),
            reason: e.to_string(),
        })
    }

    pub fn language(&self) -> LanguageTag {
        LanguageTag::new(&self.target_language.code, &self.target_language.display_name)
            .unwrap_or_else(|_| LanguageTag::english())
    }

    /// English-target captioning templates paraphrase without translating.
    pub fn is_monolingual(&self) -> bool {
        self.task == Task::Captioning && self.target_language.code == "en"
    }

    /// Paraphrase count: 4 for captioning and 1 pair for style transfer unless
    /// the template says otherwise.
    pub fn paraphrase_count(&self) -> usize {
        self.n_paraphrases.unwrap_or(match self.task {
            Task::Captioning => 4,
            Task::StyleTransfer => 1,
        })
    }

    pub fn with_paraphrase_count(mut self, n: usize) -> Self {
        self.n_paraphrases = Some(n);
        self
    }

    /// Silver entries one successful completion yields for an item.
    pub fn silver_per_item(&self) -> usize {
        match self.task {
            Task::Captioning if self.is_monolingual() => self.paraphrase_count(),
            Task::Captioning => self.paraphrase_count() + 1,
            Task::StyleTransfer => self.paraphrase_count() + 1,
        }
    }

    fn malformed(&self, reason: impl Into<String>) -> PromptError {
        PromptError::MalformedTemplate {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks the template invariants, including that the one-shot output
    /// parses with the same parser used on completions.
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.id.trim().is_empty() {
            return Err(self.malformed("empty id"));
        }
        LanguageTag::new(&self.target_language.code, &self.target_language.display_name)
            .map_err(|e| self.malformed(e.to_string()))?;
        if self.safety_directives.iter().all(|d| d.trim().is_empty()) {
            return Err(self.malformed("no safety directive"));
        }
        for name in placeholders(&self.system_text).map_err(|r| self.malformed(r))? {
            if !PLACEHOLDERS.contains(&name) {
                return Err(self.malformed(format!("unknown placeholder {{{{{name}}}}}")));
            }
        }
        if !self.system_text.contains("{{one_shot_output}}") {
            return Err(self.malformed("system text never shows the one-shot output"));
        }
        let n = self.paraphrase_count();
        match self.task {
            Task::Captioning => {
                let shown = self.one_shot_example().map_err(|e| self.malformed(e))?;
                if shown == 0 {
                    return Err(self.malformed("one-shot output lacks a \"Paraphrase 1:\" line"));
                }
                if self.is_monolingual() && n == 0 {
                    return Err(self.malformed("English paraphrasing needs at least one paraphrase"));
                }
            }
            Task::StyleTransfer => {
                if n == 0 {
                    return Err(self.malformed("style transfer needs at least one paraphrase pair"));
                }
                self.one_shot_example().map_err(|e| self.malformed(e))?;
                let input = self.one_shot.input.trim_start();
                if !input.starts_with("[Input Sentence]") {
                    return Err(self.malformed("one-shot input must be an [Input Sentence] block"));
                }
            }
        }
        Ok(())
    }

    /// Parses the one-shot output, returning how many paraphrases it shows.
    fn one_shot_example(&self) -> Result<usize, String> {
        let out = &self.one_shot.output;
        let lines = |prefix: &str| {
            out.lines()
                .filter(|l| l.trim_start().to_ascii_lowercase().starts_with(prefix))
                .count()
        };
        match self.task {
            Task::Captioning if self.is_monolingual() => {
                let m = lines("paraphrase");
                parser::parse_monolingual(out, m).map_err(|e| format!("one-shot output: {e}"))?;
                Ok(m)
            }
            Task::Captioning => {
                let m = lines("paraphrase");
                parser::parse_captioning(out, m).map_err(|e| format!("one-shot output: {e}"))?;
                Ok(m)
            }
            Task::StyleTransfer => {
                let formal = lines("formal");
                let m = formal.saturating_sub(1) / 2;
                let parse = parser::parse_tst_n(out, m.max(1)).map_err(|e| format!("one-shot output: {e}"))?;
                if !parse
                    .translation_language
                    .eq_ignore_ascii_case(&self.target_language.display_name)
                {
                    return Err(format!(
                        "one-shot translates into {}, template targets {}",
                        parse.translation_language, self.target_language.display_name
                    ));
                }
                Ok(m)
            }
        }
    }

    /// One-shot output in canonical form, cut to the requested count.
    fn rendered_example(&self) -> String {
        let n = self.paraphrase_count();
        let out = &self.one_shot.output;
        let count = |prefix: &str| {
            out.lines()
                .filter(|l| l.trim_start().to_ascii_lowercase().starts_with(prefix))
                .count()
        };
        match self.task {
            Task::Captioning if self.is_monolingual() => {
                let m = count("paraphrase");
                match parser::parse_monolingual(out, m) {
                    Ok(mut p) => {
                        p.truncate(n.max(1));
                        parser::render_monolingual(&p)
                    }
                    Err(_) => out.trim().to_string(),
                }
            }
            Task::Captioning => match parser::parse_captioning(out, count("paraphrase")) {
                Ok(mut p) => {
                    p.paraphrases.truncate(n);
                    parser::render_captioning(&p)
                }
                Err(_) => out.trim().to_string(),
            },
            Task::StyleTransfer => {
                let m = count("formal").saturating_sub(1) / 2;
                match parser::parse_tst_n(out, m.max(1)) {
                    Ok(mut p) => {
                        p.paraphrases.truncate(n);
                        p.translations.truncate(n + 1);
                        parser::render_tst(&p)
                    }
                    Err(_) => out.trim().to_string(),
                }
            }
        }
    }

    fn placeholder_value(&self, name: &str) -> String {
        let lang = &self.target_language.display_name;
        let n = self.paraphrase_count();
        match name {
            "language" => lang.clone(),
            "n_paraphrases" => n.to_string(),
            "task_summary" if self.is_monolingual() => "You will generate paraphrases of the sentence.".into(),
            "task_summary" if n == 0 => format!("You will generate a translation of the sentence in {lang} language."),
            "task_summary" => format!("You will generate paraphrases of the sentence and its translation in {lang} language."),
            "task_instruction" if self.is_monolingual() => {
                format!("You will generate {n} paraphrases of the input sentence.")
            }
            "task_instruction" if n == 0 => format!("You will generate a translation of input sentence in {lang}."),
            "task_instruction" => format!(
                "You will generate a translation of input sentence in {lang}, and also generate {n} paraphrases and its translation in {lang}."
            ),
            "style_directives" => join_directives(&self.style_directives),
            "safety_directives" => join_directives(&self.safety_directives),
            "one_shot_input" => self.one_shot.input.trim().to_string(),
            "one_shot_output" => self.rendered_example(),
            _ => String::new(),
        }
    }

    /// Renders the system message.
    pub fn render_system(&self) -> String {
        let mut lines = Vec::new();
        for line in self.system_text.lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix("{{").and_then(|r| r.strip_suffix("}}")) {
                if !name.contains("{{") && self.placeholder_value(name.trim()).is_empty() {
                    continue;
                }
            }
            lines.push(substitute(line, |name| self.placeholder_value(name)));
        }
        lines.join("\n")
    }

    fn expect_task(&self, task: Task) -> Result<(), PromptError> {
        if self.task != task {
            return Err(PromptError::TaskMismatch {
                id: self.id.clone(),
                expected: task,
                found: self.task,
            });
        }
        Ok(())
    }
}

fn join_directives(items: &[String]) -> String {
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Names of the `{{...}}` placeholders in `text`, in order.
fn placeholders(text: &str) -> Result<Vec<&str>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or("unterminated placeholder")?;
        let name = after[..end].trim();
        if name.contains("{{") || name.is_empty() {
            return Err("nested or empty placeholder".into());
        }
        out.push(name);
        rest = &after[end + 2..];
    }
    Ok(out)
}

fn substitute(text: &str, value: impl Fn(&str) -> String) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.push_str(&value(after[..end].trim()));
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the prompt asking for silver captions of one gold English caption.
pub fn build_captioning_prompt(t: &PromptTemplate, gold: &Annotation) -> Result<PromptBundle, PromptError> {
    t.expect_task(Task::Captioning)?;
    if !gold.language().is_english() {
        return Err(PromptError::NonEnglishGold(gold.language().code().to_string()));
    }
    Ok(PromptBundle {
        system_message: t.render_system(),
        user_message: format!("Input: {}", gold.text()),
        template_id: t.id.clone(),
    })
}

/// Renders the prompt asking for a translated and paraphrased style pair.
pub fn build_tst_prompt(t: &PromptTemplate, pair: &StylePair) -> Result<PromptBundle, PromptError> {
    t.expect_task(Task::StyleTransfer)?;
    for a in [pair.formal(), pair.informal()] {
        if !a.language().is_english() {
            return Err(PromptError::NonEnglishGold(a.language().code().to_string()));
        }
    }
    Ok(PromptBundle {
        system_message: t.render_system(),
        user_message: format!(
            "[Input Sentence]\nFormal 1: {}\nInformal 1: {}",
            pair.formal().text(),
            pair.informal().text()
        ),
        template_id: t.id.clone(),
    })
}
