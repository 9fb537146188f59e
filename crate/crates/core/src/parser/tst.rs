use std::collections::BTreeMap;

use super::{content_lines, split_label, ParseError, RefusalPatterns};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub formal: String,
    pub informal: String,
}

/// A parsed style-transfer completion.
///
/// `paraphrases` holds the new English pairs (labelled 2, 3, ...);
/// `translations` holds the target-language pairs, the translated original
/// first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TstParse {
    pub translation_language: String,
    pub paraphrases: Vec<TextPair>,
    pub translations: Vec<TextPair>,
}

impl TstParse {
    pub fn paraphrase_formal_en(&self) -> &str {
        &self.paraphrases[0].formal
    }

    pub fn paraphrase_informal_en(&self) -> &str {
        &self.paraphrases[0].informal
    }

    /// Target-language text for `Formal k` / `Informal k`, `k` starting at 1.
    pub fn translation(&self, k: usize, formal: bool) -> Option<&str> {
        let pair = self.translations.get(k.checked_sub(1)?)?;
        Some(if formal { &pair.formal } else { &pair.informal })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Input,
    Paraphrase,
    Translation,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Input => "Input Sentence",
            Section::Paraphrase => "Paraphrase",
            Section::Translation => "Translation",
        }
    }
}

fn header(line: &str) -> Option<&str> {
    line.strip_prefix('[')?.strip_suffix(']').map(str::trim)
}

fn classify(name: &str) -> Result<(Section, Option<&str>), ParseError> {
    let lower = name.to_ascii_lowercase();
    if lower == "input sentence" {
        Ok((Section::Input, None))
    } else if lower == "paraphrase" {
        Ok((Section::Paraphrase, None))
    } else if lower.starts_with("translation in ") && name.len() > "translation in ".len() {
        Ok((Section::Translation, Some(name["translation in ".len()..].trim())))
    } else {
        Err(ParseError::UnexpectedSection(name.to_string()))
    }
}

fn label(formal: bool, k: usize) -> String {
    format!("{} {k}", if formal { "Formal" } else { "Informal" })
}

/// Parses a style-transfer completion with one paraphrase pair.
pub fn parse_tst(raw: &str) -> Result<TstParse, ParseError> {
    parse_tst_n(raw, 1)
}

/// Parses a style-transfer completion with `n` paraphrase pairs.
pub fn parse_tst_n(raw: &str, n: usize) -> Result<TstParse, ParseError> {
    parse_tst_with(raw, n, RefusalPatterns::builtin())
}

pub fn parse_tst_with(raw: &str, n: usize, patterns: &RefusalPatterns) -> Result<TstParse, ParseError> {
    if let Some(p) = patterns.find(raw) {
        return Err(ParseError::RefusalDetected(p));
    }

    let mut language = None;
    let mut seen = Vec::new();
    for (_, line) in content_lines(raw) {
        if let Some(name) = header(line) {
            let (section, lang) = classify(name)?;
            if seen.contains(&section) {
                return Err(ParseError::UnexpectedSection(name.to_string()));
            }
            seen.push(section);
            if lang.is_some() {
                language = lang;
            }
        }
    }
    for required in [Section::Paraphrase, Section::Translation] {
        if !seen.contains(&required) {
            return Err(ParseError::MissingSection(required.name().into()));
        }
    }
    let language = language.unwrap_or_default();

    let mut current = None;
    let mut fields: BTreeMap<(Section, bool, usize), &str> = BTreeMap::new();
    for (line_no, line) in content_lines(raw) {
        if let Some(name) = header(line) {
            current = Some(classify(name)?.0);
            continue;
        }
        let section = current.ok_or(ParseError::UnexpectedLine(line_no))?;
        let (word, k, rest) = match split_label(line, &["formal", "informal"]) {
            Some((w, Some(k), rest)) => (w, k, rest),
            _ => return Err(ParseError::UnexpectedLine(line_no)),
        };
        let formal = word == "formal";
        let allowed = match section {
            Section::Input => k == 1,
            Section::Paraphrase => (2..=n + 1).contains(&k),
            Section::Translation => (1..=n + 1).contains(&k),
        };
        if !allowed {
            return Err(ParseError::UnexpectedLine(line_no));
        }
        if fields.insert((section, formal, k), rest).is_some() {
            return Err(ParseError::DuplicateLine {
                section: section.name().into(),
                label: label(formal, k),
            });
        }
    }

    let take = |section: Section, k: usize, formal: bool| -> Result<String, ParseError> {
        let value = fields.get(&(section, formal, k)).ok_or_else(|| ParseError::MissingLine {
            section: section.name().into(),
            label: label(formal, k),
        })?;
        if value.is_empty() {
            return Err(ParseError::EmptyField(format!("{} / {}", section.name(), label(formal, k))));
        }
        Ok(value.to_string())
    };
    let pairs = |section: Section, range: std::ops::RangeInclusive<usize>| -> Result<Vec<TextPair>, ParseError> {
        range
            .map(|k| {
                Ok(TextPair {
                    formal: take(section, k, true)?,
                    informal: take(section, k, false)?,
                })
            })
            .collect()
    };
    let paraphrases = pairs(Section::Paraphrase, 2..=n + 1)?;
    let translations = pairs(Section::Translation, 1..=n + 1)?;
    Ok(TstParse {
        translation_language: language.to_string(),
        paraphrases,
        translations,
    })
}

/// Renders the output sections in the demonstrated surface format.
pub fn render_tst(parse: &TstParse) -> String {
    let mut lines = vec!["[Paraphrase]".to_string()];
    for (i, p) in parse.paraphrases.iter().enumerate() {
        lines.push(format!("Formal {}: {}", i + 2, p.formal));
        lines.push(format!("Informal {}: {}", i + 2, p.informal));
    }
    lines.push(format!("[Translation in {}]", parse.translation_language));
    for (i, p) in parse.translations.iter().enumerate() {
        lines.push(format!("Formal {}: {}", i + 1, p.formal));
        lines.push(format!("Informal {}: {}", i + 1, p.informal));
    }
    lines.join("\n")
}
