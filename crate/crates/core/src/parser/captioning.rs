use super::{content_lines, split_label, ParseError, RefusalPatterns};

const SEPARATOR: &str = " / ";

/// An English paraphrase and its target-language rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParaphrasePair {
    pub english: String,
    pub target: String,
}

/// A parsed captioning completion: one translation of the input plus the
/// requested paraphrase pairs, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptioningParse {
    pub translation: String,
    pub paraphrases: Vec<ParaphrasePair>,
}

struct Scan<'a> {
    translation: Option<&'a str>,
    paraphrases: Vec<(usize, &'a str)>,
}

fn scan<'a>(raw: &'a str, patterns: &RefusalPatterns, allow_translation: bool) -> Result<Scan<'a>, ParseError> {
    if let Some(p) = patterns.find(raw) {
        return Err(ParseError::RefusalDetected(p));
    }
    let mut out = Scan {
        translation: None,
        paraphrases: Vec::new(),
    };
    for (line_no, line) in content_lines(raw) {
        match split_label(line, &["translation", "paraphrase"]) {
            Some((word, None, rest)) if word == "translation" && allow_translation => {
                if out.translation.is_some() {
                    return Err(ParseError::DuplicateLine {
                        section: "output".into(),
                        label: "Translation".into(),
                    });
                }
                out.translation = Some(rest);
            }
            Some((word, Some(k), rest)) if word == "paraphrase" => out.paraphrases.push((k, rest)),
            _ => return Err(ParseError::UnexpectedLine(line_no)),
        }
    }
    Ok(out)
}

fn check_numbering(paraphrases: &[(usize, &str)], n: usize) -> Result<(), ParseError> {
    if paraphrases.len() != n {
        return Err(ParseError::ParaphraseCountMismatch {
            expected: n,
            found: paraphrases.len(),
        });
    }
    for (i, (k, _)) in paraphrases.iter().enumerate() {
        if *k != i + 1 {
            return Err(ParseError::BadNumbering {
                expected: i + 1,
                found: *k,
            });
        }
    }
    Ok(())
}

/// Parses a bilingual captioning completion expecting exactly `n` paraphrases.
pub fn parse_captioning(raw: &str, n: usize) -> Result<CaptioningParse, ParseError> {
    parse_captioning_with(raw, n, RefusalPatterns::builtin())
}

pub fn parse_captioning_with(
    raw: &str,
    n: usize,
    patterns: &RefusalPatterns,
) -> Result<CaptioningParse, ParseError> {
    let scan = scan(raw, patterns, true)?;
    let translation = scan
        .translation
        .ok_or_else(|| ParseError::MissingSection("Translation".into()))?;
    if translation.is_empty() {
        return Err(ParseError::EmptyField("Translation".into()));
    }
    check_numbering(&scan.paraphrases, n)?;
    let mut paraphrases = Vec::with_capacity(n);
    for (k, rest) in scan.paraphrases {
        let (english, target) = rest
            .split_once(SEPARATOR)
            .ok_or(ParseError::SeparatorMissing(k))?;
        let (english, target) = (english.trim(), target.trim());
        if english.is_empty() || target.is_empty() {
            return Err(ParseError::EmptyField(format!("Paraphrase {k}")));
        }
        paraphrases.push(ParaphrasePair {
            english: english.to_string(),
            target: target.to_string(),
        });
    }
    Ok(CaptioningParse {
        translation: translation.to_string(),
        paraphrases,
    })
}

/// Parses an English-only paraphrase completion (`Paraphrase k: <text>` lines).
pub fn parse_monolingual(raw: &str, n: usize) -> Result<Vec<String>, ParseError> {
    parse_monolingual_with(raw, n, RefusalPatterns::builtin())
}

pub fn parse_monolingual_with(raw: &str, n: usize, patterns: &RefusalPatterns) -> Result<Vec<String>, ParseError> {
    let scan = scan(raw, patterns, false)?;
    check_numbering(&scan.paraphrases, n)?;
    scan.paraphrases
        .into_iter()
        .map(|(k, rest)| {
            if rest.is_empty() {
                Err(ParseError::EmptyField(format!("Paraphrase {k}")))
            } else {
                Ok(rest.to_string())
            }
        })
        .collect()
}

fn normalized(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Rejects a parse whose translation merely repeats the English source.
pub fn check_translation(parse: &CaptioningParse, source: &str) -> Result<(), ParseError> {
    if normalized(&parse.translation) == normalized(source) {
        return Err(ParseError::NoTranslation);
    }
    Ok(())
}

/// Renders a parse back into the surface format the prompts demonstrate.
pub fn render_captioning(parse: &CaptioningParse) -> String {
    let mut out = format!("Translation: {}", parse.translation);
    for (i, p) in parse.paraphrases.iter().enumerate() {
        out.push_str(&format!("\nParaphrase {}: {}{SEPARATOR}{}", i + 1, p.english, p.target));
    }
    out
}

pub fn render_monolingual(paraphrases: &[String]) -> String {
    paraphrases
        .iter()
        .enumerate()
        .map(|(i, p)| format!("Paraphrase {}: {p}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = include_str!("../../tests/fixtures/captioning_ko_ok.txt");

    #[test]
    fn parses_korean_example() {
        let p = parse_captioning(EXAMPLE, 4).unwrap();
        assert_eq!(p.translation, "타석에 있는 남자들이 심판이 지켜보는 동안 스윙할 준비를 한다.");
        assert_eq!(p.paraphrases.len(), 4);
        assert_eq!(
            p.paraphrases[0].english,
            "The male players at the bat ready to hit the ball as the umpire watches attentively."
        );
        assert_eq!(
            p.paraphrases[3].target,
            "타석에 선 타자들은 심판이 지켜보는 동안 공을 향해 스윙할 준비를 한다."
        );
        assert_eq!(render_captioning(&p), EXAMPLE.trim_end());
    }

    #[test]
    fn count_mismatch() {
        let three: String = EXAMPLE.lines().take(4).collect::<Vec<_>>().join("\n");
        assert_eq!(
            parse_captioning(&three, 4),
            Err(ParseError::ParaphraseCountMismatch { expected: 4, found: 3 })
        );
    }

    #[test]
    fn refusal_and_missing() {
        assert!(matches!(parse_captioning("I don't know", 4), Err(ParseError::RefusalDetected(_))));
        let no_tr: String = EXAMPLE.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(
            parse_captioning(&no_tr, 4),
            Err(ParseError::MissingSection("Translation".into()))
        );
    }

    #[test]
    fn blank_lines_and_case_are_tolerated() {
        let raw = "\ntranslation: 개가 뛴다.\n\n\nPARAPHRASE 1. A dog runs. / 개가 달린다.\n\n";
        let p = parse_captioning(raw, 1).unwrap();
        assert_eq!(p.translation, "개가 뛴다.");
        assert_eq!(p.paraphrases[0].target, "개가 달린다.");
    }

    #[test]
    fn separator_rules() {
        let raw = "Translation: t\nParaphrase 1: a/b";
        assert_eq!(parse_captioning(raw, 1), Err(ParseError::SeparatorMissing(1)));
        let raw = "Translation: t\nParaphrase 1: see 1/2 of it / 그것의 1/2을 보다";
        let p = parse_captioning(raw, 1).unwrap();
        assert_eq!(p.paraphrases[0].english, "see 1/2 of it");
        assert_eq!(p.paraphrases[0].target, "그것의 1/2을 보다");
    }

    #[test]
    fn zero_paraphrases() {
        let p = parse_captioning("Translation: 개가 뛴다.", 0).unwrap();
        assert!(p.paraphrases.is_empty());
    }

    #[test]
    fn numbering_and_stray_lines() {
        let raw = "Translation: t\nParaphrase 2: a / b";
        assert_eq!(parse_captioning(raw, 1), Err(ParseError::BadNumbering { expected: 1, found: 2 }));
        let raw = "Translation: t\nsome commentary\nParaphrase 1: a / b";
        assert_eq!(parse_captioning(raw, 1), Err(ParseError::UnexpectedLine(2)));
        let raw = "Translation: t\nTranslation: u";
        assert!(matches!(parse_captioning(raw, 0), Err(ParseError::DuplicateLine { .. })));
        let raw = "Translation:\nParaphrase 1: a / b";
        assert_eq!(parse_captioning(raw, 1), Err(ParseError::EmptyField("Translation".into())));
    }

    #[test]
    fn no_translation_check() {
        let p = parse_captioning("Translation: A dog  runs.", 0).unwrap();
        assert_eq!(check_translation(&p, "a dog runs."), Err(ParseError::NoTranslation));
        let p = parse_captioning("Translation: 개가 뛴다.", 0).unwrap();
        assert!(check_translation(&p, "A dog runs.").is_ok());
    }

    #[test]
    fn monolingual() {
        let raw = "Paraphrase 1: A dog is running.\nParaphrase 2: A canine sprints.";
        assert_eq!(parse_monolingual(raw, 2).unwrap(), ["A dog is running.", "A canine sprints."]);
        assert!(matches!(
            parse_monolingual("Translation: x\nParaphrase 1: y", 1),
            Err(ParseError::UnexpectedLine(1))
        ));
        let v = vec!["a".to_string(), "b".to_string()];
        assert_eq!(parse_monolingual(&render_monolingual(&v), 2).unwrap(), v);
    }

    fn sentence() -> impl Strategy<Value = String> {
        "[A-Za-z가-힣āēū0-9][A-Za-z가-힣āēū0-9 ,.!?'/]{0,40}[A-Za-z가-힣.!?]"
            .prop_filter("no separator", |s| !s.contains(SEPARATOR))
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            translation in sentence(),
            pairs in proptest::collection::vec((sentence(), sentence()), 0..7),
        ) {
            let parse = CaptioningParse {
                translation,
                paraphrases: pairs.into_iter().map(|(english, target)| ParaphrasePair { english, target }).collect(),
            };
            let raw = render_captioning(&parse);
            prop_assert_eq!(parse_captioning(&raw, parse.paraphrases.len()).unwrap(), parse);
        }

        #[test]
        fn extracted_strings_are_slices_of_input(raw in "(Translation: [a-z ]{1,10}\n)?(Paraphrase [1-3]: [a-z /]{1,12}\n){0,3}") {
            if let Ok(p) = parse_captioning(&raw, raw.matches("Paraphrase").count()) {
                prop_assert!(raw.contains(&p.translation));
                for pair in &p.paraphrases {
                    prop_assert!(raw.contains(&pair.english));
                    prop_assert!(raw.contains(&pair.target));
                }
            }
        }

        #[test]
        fn never_panics(raw in "\\PC*", n in 0usize..6) {
            let _ = parse_captioning(&raw, n);
            let _ = parse_monolingual(&raw, n);
        }
    }
}
