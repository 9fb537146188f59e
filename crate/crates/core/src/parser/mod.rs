//! Parsing raw completions into structured annotations.
//!
//! Both formats are line oriented. Captioning completions look like
//!
//! ```text
//! Translation: <target sentence>
//! Paraphrase 1: <english> / <target>
//! ...
//! ```
//!
//! and style-transfer completions carry a `[Paraphrase]` section with the new
//! English pair followed by a `[Translation in <language>]` section with the
//! original and new pairs in the target language. Labels are matched without
//! regard to case, and the number may be followed by `.` or `)`.
//!
//! Extracted strings are always verbatim slices of the input with the edge
//! whitespace trimmed.

mod captioning;
mod refusal;
mod tst;

use thiserror::Error;

pub use captioning::{
    check_translation, parse_captioning, parse_captioning_with, parse_monolingual, parse_monolingual_with,
    render_captioning, render_monolingual,
    CaptioningParse, ParaphrasePair,
};
pub use refusal::{detect_refusal, RefusalPatterns, DEFAULT_REFUSAL_PATTERNS};
pub use tst::{parse_tst, parse_tst_n, parse_tst_with, render_tst, TextPair, TstParse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("completion is a refusal or preamble ({0:?})")]
    RefusalDetected(String),
    #[error("missing section {0}")]
    MissingSection(String),
    #[error("expected {expected} paraphrases, found {found}")]
    ParaphraseCountMismatch { expected: usize, found: usize },
    #[error("paraphrase {0} has no \" / \" separator")]
    SeparatorMissing(usize),
    #[error("paraphrase numbered {found} where {expected} was expected")]
    BadNumbering { expected: usize, found: usize },
    #[error("unexpected line {0}")]
    UnexpectedLine(usize),
    #[error("empty field {0}")]
    EmptyField(String),
    #[error("duplicate line {label} in section {section}")]
    DuplicateLine { section: String, label: String },
    #[error("missing line {label} in section {section}")]
    MissingLine { section: String, label: String },
    #[error("unexpected section [{0}]")]
    UnexpectedSection(String),
    #[error("translation is into {found}, expected {expected}")]
    LanguageMismatch { expected: String, found: String },
    #[error("translation repeats the English input")]
    NoTranslation,
}

/// Iterates non-blank lines with their 1-based line numbers.
fn content_lines(raw: &str) -> impl Iterator<Item = (usize, &str)> {
    raw.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Splits `"<word> <number><punct>: rest"` style labels. Returns the lower-cased
/// word, the number (if any) and the trimmed remainder.
fn split_label<'a>(line: &'a str, words: &[&str]) -> Option<(String, Option<usize>, &'a str)> {
    let word = words.iter().find(|w| {
        line.get(..w.len())
            .is_some_and(|head| head.eq_ignore_ascii_case(w))
    })?;
    let mut rest = &line[word.len()..];
    let trimmed = rest.trim_start();
    let digits = trimmed.bytes().take_while(u8::is_ascii_digit).count();
    let number = if digits > 0 {
        let n = trimmed[..digits].parse().ok()?;
        rest = &trimmed[digits..];
        Some(n)
    } else {
        None
    };
    let rest = rest.trim_start();
    let rest = match rest.as_bytes().first() {
        Some(b':') => &rest[1..],
        Some(b'.') | Some(b')') if number.is_some() => {
            let r = &rest[1..];
            r.trim_start().strip_prefix(':').unwrap_or(r)
        }
        _ => return None,
    };
    Some((word.to_string(), number, rest.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_variants() {
        let w = ["paraphrase", "translation"];
        assert_eq!(
            split_label("Paraphrase 1: a / b", &w),
            Some(("paraphrase".into(), Some(1), "a / b"))
        );
        assert_eq!(
            split_label("PARAPHRASE 2.: x", &w),
            Some(("paraphrase".into(), Some(2), "x"))
        );
        assert_eq!(split_label("paraphrase 3) x", &w), Some(("paraphrase".into(), Some(3), "x")));
        assert_eq!(split_label("Translation:  y ", &w), Some(("translation".into(), None, "y")));
        assert_eq!(split_label("Translation y", &w), None);
        assert_eq!(split_label("Paraphrases are fun", &w), None);
        assert_eq!(split_label("타석에", &w), None);
    }
}
