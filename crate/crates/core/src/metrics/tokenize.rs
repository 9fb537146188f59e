use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::LanguageTag;

/// Identifier of the tokenization rule, written into every report.
pub const TOKENIZER_ID: &str = "uax29-fold-v1";

/// Dash punctuation (general category Pd).
const DASHES: &[char] = &[
    '\u{002D}', '\u{058A}', '\u{05BE}', '\u{1400}', '\u{1806}', '\u{2010}', '\u{2011}', '\u{2012}', '\u{2013}',
    '\u{2014}', '\u{2015}', '\u{2E17}', '\u{2E1A}', '\u{2E3A}', '\u{2E3B}', '\u{2E40}', '\u{2E5D}', '\u{301C}',
    '\u{3030}', '\u{30A0}', '\u{FE31}', '\u{FE32}', '\u{FE58}', '\u{FE63}', '\u{FF0D}', '\u{10EAD}',
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
    pub language: LanguageTag,
}

impl TokenizedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits `text` at Unicode word boundaries and lower-cases each piece.
///
/// Whitespace is dropped, as are pieces made only of dashes (so hyphenated
/// words split into their parts); every other punctuation mark is its own
/// token. Scripts that separate words with spaces, Korean included, follow
/// the same rule.
pub fn tokenize(text: &str, language: &LanguageTag) -> TokenizedSentence {
    TokenizedSentence {
        tokens: tokens(text),
        language: language.clone(),
    }
}

pub(crate) fn tokens(text: &str) -> Vec<String> {
    // A combining mark after a space joins the space's segment, so segments
    // are split on whitespace once more.
    text.split_word_bounds()
        .flat_map(str::split_whitespace)
        .filter(|s| !s.chars().all(|c| DASHES.contains(&c)))
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<String> {
        tokenize(s, &LanguageTag::english()).tokens
    }

    #[test]
    fn examples() {
        assert_eq!(t("A black dog and a spotted dog"), ["a", "black", "dog", "and", "a", "spotted", "dog"]);
        assert!(t("").is_empty());
        assert!(t("  \n").is_empty());
        assert_eq!(t("embrasse-la, mon frère."), ["embrasse", "la", ",", "mon", "frère", "."]);
        assert_eq!(t("Don't stop!!"), ["don't", "stop", "!", "!"]);
        assert_eq!(t("타석에 있는 남자들이."), ["타석에", "있는", "남자들이", "."]);
        assert_eq!(t("ĀBOLS — Ābele"), ["ābols", "ābele"]);
    }

    proptest! {
        #[test]
        fn tokens_have_no_whitespace(s in "\\PC{0,60}") {
            for tok in t(&s) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
            }
        }
    }
}
