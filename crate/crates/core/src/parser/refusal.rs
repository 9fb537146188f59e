/// Phrases that mark a completion as a refusal or a chatty preamble.
pub const DEFAULT_REFUSAL_PATTERNS: &[&str] = &["I don't know", "Sure! here's", "I cannot", "As an AI"];

/// Refusal detector over a configurable phrase list.
///
/// A completion is a refusal when it is blank or when any of its lines starts
/// with one of the phrases. Matching ignores case and treats typographic
/// apostrophes as ASCII ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefusalPatterns {
    patterns: Vec<String>,
}

impl Default for RefusalPatterns {
    fn default() -> Self {
        Self::new(DEFAULT_REFUSAL_PATTERNS.iter().copied())
    }
}

fn fold(c: char) -> impl Iterator<Item = char> {
    match c {
        '\u{2019}' | '\u{2018}' | '`' => '\''.to_lowercase(),
        c => c.to_lowercase(),
    }
}

fn normalize(s: &str) -> String {
    s.chars().flat_map(fold).collect()
}

/// `line` starts with the already-normalized `pattern`, without allocating.
fn starts_with_folded(line: &str, pattern: &str) -> bool {
    let mut folded = line.chars().flat_map(fold);
    pattern.chars().all(|p| folded.next() == Some(p))
}

impl RefusalPatterns {
    pub fn new<I, S>(patterns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            patterns: patterns
                .into_iter()
                .map(|p| normalize(p.as_ref().trim()))
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    /// The default phrase list, built once.
    pub fn builtin() -> &'static RefusalPatterns {
        static BUILTIN: std::sync::LazyLock<RefusalPatterns> = std::sync::LazyLock::new(RefusalPatterns::default);
        &BUILTIN
    }

    /// Returns the matching phrase, or an empty string for a blank completion.
    pub fn find(&self, raw: &str) -> Option<String> {
        if raw.trim().is_empty() {
            return Some(String::new());
        }
        raw.lines().find_map(|line| {
            let line = line.trim_start();
            self.patterns.iter().find(|p| starts_with_folded(line, p)).cloned()
        })
    }

    pub fn detects(&self, raw: &str) -> bool {
        self.find(raw).is_some()
    }
}

/// [`RefusalPatterns::detects`] with the default phrase list.
pub fn detect_refusal(raw: &str) -> bool {
    RefusalPatterns::builtin().detects(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert!(detect_refusal("I don't know."));
        assert!(detect_refusal("i DON’T know"));
        assert!(detect_refusal(""));
        assert!(detect_refusal("  \n\t"));
        assert!(detect_refusal("Sure! here's the output\nTranslation: x"));
        assert!(detect_refusal("As an AI language model, I can't"));
        assert!(!detect_refusal("Translation: 개가 뛴다.\nParaphrase 1: A dog runs. / 개가 달린다."));
        assert!(!detect_refusal("Paraphrase 1: I cannot see / x"));
    }

    #[test]
    fn custom_list() {
        let p = RefusalPatterns::new(["Lo siento"]);
        assert!(p.detects("lo siento, no puedo"));
        assert!(!p.detects("I don't know"));
    }
}
