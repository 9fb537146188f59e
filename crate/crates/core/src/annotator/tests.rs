use std::path::Path;

use super::*;
use crate::backend::{BackendConfig, MockBackend, MockScript, MockStep, SimulatedClock};
use crate::corpus::{load_dataset, load_exclusions, ProvenanceKind};
use crate::prompt::TemplateRegistry;

const KO_OUTPUT: &str = include_str!("../../tests/fixtures/captioning_ko_ok.txt");
const FR_OUTPUT: &str = include_str!("../../tests/fixtures/tst_fr_ok.txt");

fn template(id: &str) -> PromptTemplate {
    TemplateRegistry::with_builtins().get(id).unwrap().clone()
}

fn config() -> BackendConfig {
    BackendConfig {
        max_concurrency: 2,
        ..BackendConfig::default()
    }
}

fn caption(id: &str) -> DataItem {
    DataItem::captioning(id, None, "Living room with furniture with garage door at one end.").unwrap()
}

fn pair(id: &str) -> DataItem {
    DataItem::style_transfer(
        id,
        "and enver since then i never bought her another gift",
        "After that I never bought her another gift.",
    )
    .unwrap()
}

#[test]
fn captioning_record_has_translation_then_paraphrases() {
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(KO_OUTPUT)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let items = [caption("img_1")];
    let run = annotate_captioning(&items, &template("captioning-ko"), &d).unwrap();
    assert_eq!(run.records.len(), 1);
    let rec = &run.records[0];
    assert!(!rec.is_excluded());
    assert_eq!(rec.item, items[0]);
    let texts = rec.silver.texts();
    assert_eq!(texts.len(), 5);
    assert_eq!(texts[0].annotation.text(), "타석에 있는 남자들이 심판이 지켜보는 동안 스윙할 준비를 한다.");
    assert_eq!(texts[0].english_intermediate, None);
    assert_eq!(
        texts[1].english_intermediate.as_deref(),
        Some("The male players at the bat ready to hit the ball as the umpire watches attentively.")
    );
    for t in texts {
        assert_eq!(t.annotation.language().code(), "ko");
        let p = t.annotation.provenance();
        assert_eq!(p.kind(), ProvenanceKind::Silver);
        assert_eq!(p.generator(), Some("gpt-3.5-turbo-0301"));
        assert_eq!(p.prompt_id(), Some("captioning-ko"));
    }
    rec.validate(Some(5)).unwrap();
    assert_eq!(run.calls, 1);
    assert!(run.usage.estimated);
}

#[test]
fn garbage_completions_exclude_with_last_error() {
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text("Here you go: 거실")]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_captioning(&[caption("img_1")], &template("captioning-ko"), &d).unwrap();
    let rec = &run.records[0];
    assert!(rec.is_excluded());
    assert_eq!(rec.exclusion.as_ref().unwrap().attempts, 3);
    assert!(rec.exclusion_reason().unwrap().contains("unexpected line 1"));
    assert_eq!(mock.calls("img_1"), 3);
    assert_eq!(run.calls, 3);
}

#[test]
fn untranslated_output_is_retried() {
    let echo = "Translation: Living room with furniture with garage door at one end.\n\
                Paraphrase 1: a / 가\nParaphrase 2: b / 나\nParaphrase 3: c / 다\nParaphrase 4: d / 라";
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(echo), MockStep::text(KO_OUTPUT)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_captioning(&[caption("img_1")], &template("captioning-ko"), &d).unwrap();
    assert!(!run.records[0].is_excluded());
    assert_eq!(mock.calls("img_1"), 2);
}

#[test]
fn no_items_no_records() {
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(KO_OUTPUT)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_captioning(&[], &template("captioning-ko"), &d).unwrap();
    assert!(run.records.is_empty());
    assert_eq!(mock.total_calls(), 0);
}

#[test]
fn tst_record_has_two_french_pairs() {
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(FR_OUTPUT)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_tst(&[pair("gyafc_1")], &template("tst-fr"), &d).unwrap();
    let rec = &run.records[0];
    let SilverAnnotations::StylePairs(pairs) = &rec.silver else { panic!("expected pairs") };
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[0].formal.annotation.text(), "Alors embrasse-la, mon frère. Cela fonctionne à chaque fois.");
    assert_eq!(pairs[0].formal.english_intermediate, None);
    // the Formal 2 / Informal 2 translation is the second pair
    assert_eq!(
        pairs[1].formal.annotation.text(),
        "Ensuite, embrasse-la, frère ; cette méthode fonctionne à chaque fois."
    );
    assert_eq!(
        pairs[1].formal.english_intermediate.as_deref(),
        Some("Subsequently, kiss her, sibling; that method proves effective on each occasion.")
    );
    assert_eq!(
        pairs[1].informal.annotation.text(),
        "Alors, donne-lui un bisou, mec ! Ça marche à tous les coups ;)"
    );
    assert_eq!(pairs[1].informal.annotation.language().code(), "fr");
    rec.validate(Some(2)).unwrap();
}

#[test]
fn tst_missing_line_and_wrong_language_exclude() {
    let missing: String = FR_OUTPUT
        .lines()
        .filter(|l| !l.starts_with("Informal 2: Alors"))
        .collect::<Vec<_>>()
        .join("\n");
    let spanish = FR_OUTPUT.replace("[Translation in French]", "[Translation in Spanish]");
    let script = MockScript::default()
        .with_id("a", vec![MockStep::text(&missing)])
        .with_id("b", vec![MockStep::text(&spanish)]);
    let mock = MockBackend::new(script);
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_tst(&[pair("a"), pair("b")], &template("tst-fr"), &d).unwrap();
    assert_eq!(run.excluded(), 2);
    assert!(run.records[0].exclusion_reason().unwrap().contains("Informal 2"));
    assert!(run.records[1].exclusion_reason().unwrap().contains("Spanish"));
    assert_eq!(mock.calls("a"), 3);
    assert_eq!(mock.calls("b"), 3);
}

#[test]
fn english_paraphrasing() {
    let out = "Paraphrase 1: A furnished living room with a garage door at one end.\n\
               Paraphrase 2: A living room full of furniture, a garage door at its far end.\n\
               Paraphrase 3: Furniture fills a living room that ends in a garage door.\n\
               Paraphrase 4: At one end of the furnished living room is a garage door.";
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(out)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    let run = annotate_captioning(&[caption("x")], &template("captioning-en"), &d).unwrap();
    let texts = run.records[0].silver.texts();
    assert_eq!(texts.len(), 4);
    assert!(texts.iter().all(|t| t.annotation.language().is_english() && t.english_intermediate.is_none()));
}

#[test]
fn task_mismatch_is_a_configuration_error() {
    let mock = MockBackend::new(MockScript::for_all(vec![MockStep::text(FR_OUTPUT)]));
    let clock = SimulatedClock::new();
    let d = Dispatcher::new(&mock, config(), &clock).unwrap();
    assert!(matches!(
        annotate_tst(&[pair("a")], &template("captioning-ko"), &d),
        Err(AnnotateError::Prompt(PromptError::TaskMismatch { .. }))
    ));
    assert!(matches!(
        annotate_tst(&[caption("a")], &template("tst-fr"), &d),
        Err(AnnotateError::Config(_))
    ));
    assert_eq!(mock.total_calls(), 0);
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn batch_resume_reattempts_only_excluded_items() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        &p.join("in.json"),
        r#"[{"id": "a", "gold_caption": "A dog runs."},
            {"id": "b", "gold_caption": "A cat sleeps."},
            {"id": "c", "gold_caption": "Two birds sing."}]"#,
    );
    write(&p.join("ok.txt"), KO_OUTPUT);
    write(
        &p.join("first.json"),
        r#"{"default": {"text_file": "ok.txt"}, "ids": {"b": {"error": "transport"}}}"#,
    );
    write(&p.join("second.json"), r#"{"default": {"text_file": "ok.txt"}}"#);
    let config = |mock: &str, resume: bool| {
        format!(
            r#"{{"task": "captioning", "target_language": "ko", "input": "in.json", "output": "out.json",
                "mock": "{mock}", "resume": {resume}, "backend": {{"patience": 3, "max_concurrency": 2}}}}"#
        )
    };
    write(&p.join("run1.json"), &config("first.json", false));
    write(&p.join("run2.json"), &config("second.json", true));

    let s1 = run_batch(&p.join("run1.json")).unwrap();
    assert_eq!((s1.annotated, s1.excluded, s1.calls), (2, 1, 5));
    let excl = load_exclusions(&p.join("out.exclusions.jsonl")).unwrap();
    assert_eq!(excl.len(), 1);
    assert_eq!(excl[0].id, "b");
    assert!(excl[0].last_error.contains("transport"));

    let s2 = run_batch(&p.join("run2.json")).unwrap();
    assert_eq!((s2.attempted, s2.annotated, s2.excluded, s2.calls), (1, 3, 0, 1));
    let ds = load_dataset(&p.join("out.json")).unwrap();
    let ids: Vec<_> = ds.records.iter().map(|r| r.id()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    assert_eq!(ds.meta.unwrap().created_at, "1970-01-01T00:00:00Z");
    assert!(load_exclusions(&p.join("out.exclusions.jsonl")).unwrap().is_empty());

    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(p.join("out.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.model_id, "gpt-3.5-turbo-0301");
    assert_eq!(manifest.backend, "mock");
    assert!(manifest.resumed);
    assert_eq!(manifest.config_sha256.len(), 64);
    assert_eq!(manifest.summary, s2);
}

#[test]
fn batch_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(&p.join("in.json"), r#"[{"id": "a", "gold_caption": "A dog runs."}]"#);
    write(&p.join("m.json"), r#"{"default": {"text": "x"}}"#);
    for (body, needle) in [
        (r#""task": "captioning", "target_language": "Korean!""#, "language"),
        (r#""task": "captioning", "target_language": "xx""#, "unknown template"),
        (r#""task": "tst", "target_language": "ko""#, "unknown template"),
        (r#""task": "captioning", "target_language": "ko", "template": "tst-fr""#, "template"),
        (r#""task": "captioning", "target_language": "ko", "backend": {"patience": 0}"#, "patience"),
        (r#""task": "captioning", "target_language": "ko", "resume": true"#, "nothing to resume"),
    ] {
        write(
            &p.join("c.json"),
            &format!(r#"{{{body}, "input": "in.json", "output": "out.json", "mock": "m.json"}}"#),
        );
        let err = run_batch(&p.join("c.json")).unwrap_err().to_string();
        assert!(err.to_lowercase().contains(needle), "{err} lacks {needle}");
    }
    write(&p.join("c.json"), r#"{"task": "captioning", "target_language": "ko", "inptu": "x", "output": "y"}"#);
    assert!(matches!(run_batch(&p.join("c.json")), Err(AnnotateError::Config(_))));
}

#[test]
fn summary_tokens_are_sums_over_exchanges() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        &p.join("in.json"),
        r#"[{"id": "a", "gold_caption": "A dog runs."}, {"id": "b", "gold_caption": "A cat sleeps."}]"#,
    );
    let cfg = RunConfig {
        task: Task::Captioning,
        target_language: "ko".into(),
        template: None,
        n_paraphrases: None,
        input: p.join("in.json"),
        output: p.join("out.json"),
        exclusions: None,
        manifest: None,
        mock: None,
        resume: false,
        created_at: Some("2024-01-01T00:00:00Z".into()),
        refusal_patterns: None,
        pricing: None,
        backend: config(),
    };
    let script = MockScript::for_all(vec![MockStep::text("garbage"), MockStep::text(KO_OUTPUT)]);
    let mock = MockBackend::new(script.clone());
    let s = run_batch_with(&cfg, &mock, &SimulatedClock::new()).unwrap();

    // the same exchanges, replayed by hand
    let t = template("captioning-ko");
    let mut prompt = 0;
    let mut completion = 0;
    for gold in ["A dog runs.", "A cat sleeps."] {
        let bundle = build_captioning_prompt(&t, &Annotation::gold_english(gold).unwrap()).unwrap();
        let req = crate::backend::ChatRequest::from_bundle(&bundle, &cfg.backend);
        for reply in ["garbage", KO_OUTPUT] {
            let u = Usage::estimate(&req, reply);
            prompt += u.prompt_tokens;
            completion += u.completion_tokens;
        }
    }
    assert_eq!((s.prompt_tokens, s.completion_tokens), (prompt, completion));
    assert_eq!(s.calls, 4);
    assert!(s.usage_estimated);
    assert_eq!(
        s.estimated_cost,
        crate::cost::TokenPricing::default().cost(prompt, completion)
    );
    assert_eq!(s.silver_annotations, 10);
}
