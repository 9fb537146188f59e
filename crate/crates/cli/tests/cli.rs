use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const KO_OUTPUT: &str = include_str!("../../core/tests/fixtures/captioning_ko_ok.txt");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annolingo"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A captioning corpus of `n` items plus a mock script, in `dir`.
fn corpus(dir: &Path, n: usize, script: &str) {
    let items: Vec<Value> = (0..n)
        .map(|i| serde_json::json!({"id": format!("img_{i:03}"), "gold_caption": format!("Picture number {i}.")}))
        .collect();
    write(&dir.join("in.json"), &serde_json::to_string(&items).unwrap());
    write(&dir.join("ok.txt"), KO_OUTPUT);
    write(&dir.join("mock.json"), script);
}

fn annotate(dir: &Path) -> Output {
    run(&[
        "annotate",
        "--task",
        "captioning",
        "--target-lang",
        "ko",
        "--input",
        s(&dir.join("in.json")),
        "--output",
        s(&dir.join("out.json")),
        "--mock",
        s(&dir.join("mock.json")),
        "--patience",
        "2",
    ])
}

#[test]
fn mock_annotate_writes_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    corpus(p, 3, r#"{"default": {"text_file": "ok.txt"}}"#);
    let o = annotate(p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(stderr(&o).lines().last().unwrap()).unwrap();
    assert_eq!(summary["annotated"], 3);
    assert_eq!(summary["silver_annotations"], 15);
    let ds: Value = serde_json::from_str(&std::fs::read_to_string(p.join("out.json")).unwrap()).unwrap();
    assert_eq!(ds.as_array().unwrap().len(), 3);
    assert!(p.join("out.manifest.json").exists());

    let v = run(&["validate", s(&p.join("out.json"))]);
    assert_eq!(v.status.code(), Some(0), "{}", stderr(&v));
    assert!(stdout(&v).contains("3 dataset records"));
}

#[test]
fn all_items_excluded_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    corpus(p, 4, r#"{"default": {"text": "Sure! Here is the translation you asked for."}}"#);
    let o = annotate(p);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let ds: Value = serde_json::from_str(&std::fs::read_to_string(p.join("out.json")).unwrap()).unwrap();
    assert_eq!(ds, serde_json::json!([]));
    let log = std::fs::read_to_string(p.join("out.exclusions.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = run(&["annotate", "--task", "captioning", "--target-lang", "ko", "--output", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--input is required"), "{err}");
    assert!(err.contains("Usage: annolingo annotate"), "{err}");
}

#[test]
fn mock_conflicts_with_api_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    corpus(p, 1, r#"{"default": {"text_file": "ok.txt"}}"#);
    let o = run(&[
        "annotate",
        "--task",
        "captioning",
        "--target-lang",
        "ko",
        "--input",
        s(&p.join("in.json")),
        "--output",
        s(&p.join("out.json")),
        "--mock",
        s(&p.join("mock.json")),
        "--api-base",
        "http://localhost:1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--mock"));
    assert!(!p.join("out.json").exists());
}

#[test]
fn split_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    corpus(p, 10, r#"{"default": {"text_file": "ok.txt"}}"#);
    assert_eq!(annotate(p).status.code(), Some(0));
    let prefix = format!("{}/part_", s(p));
    let o = run(&["split", "--ratios", "8:1:1", "--seed", "7", "--input", s(&p.join("out.json")), "--out-prefix", &prefix]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut ids = Vec::new();
    for (name, n) in [("train", 8), ("validation", 1), ("test", 1)] {
        let part: Value =
            serde_json::from_str(&std::fs::read_to_string(format!("{prefix}{name}.json")).unwrap()).unwrap();
        let part = part.as_array().unwrap();
        assert_eq!(part.len(), n, "{name}");
        ids.extend(part.iter().map(|r| r["id"].as_str().unwrap().to_string()));
    }
    ids.sort();
    assert_eq!(ids, (0..10).map(|i| format!("img_{i:03}")).collect::<Vec<_>>());
}

#[test]
fn cost_table_and_json() {
    let o = run(&["cost", "--items", "82000", "--budget", "984"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("19,680"), "{out}");
    assert!(out.contains("82,000"), "{out}");

    let o = run(&["cost", "--items", "82000", "--budget", "984", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["budget"]["human_only"], 19680);
    assert_eq!(v["budget"]["assisted"], 82000);

    let o = run(&["cost", "--price-1k", "0.002", "--split-pricing", "0.001:0.002"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_names_duplicate_id() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        &p.join("c.json"),
        r#"[{"id": "img_9", "gold_caption": "a"}, {"id": "img_9", "gold_caption": "b"}]"#,
    );
    let o = run(&["validate", s(&p.join("c.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("img_9"), "{}", stderr(&o));
}

#[test]
fn evaluate_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(
        &p.join("cand.json"),
        r#"[{"id": "1", "text": "a man is running"}, {"id": "2", "text": "two dogs play"}]"#,
    );
    write(
        &p.join("refs.json"),
        r#"[{"id": "1", "references": ["a man is running"]}, {"id": "2", "references": ["two dogs play", "dogs playing"]}]"#,
    );
    let o = run(&[
        "evaluate",
        "--candidates",
        s(&p.join("cand.json")),
        "--references",
        s(&p.join("refs.json")),
        "--metrics",
        "bleu,rouge_l",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["bleu"], 100.0);
    assert_eq!(v["metrics"]["rouge_l"]["score"], 1.0);
    assert!(v["metrics"].get("meteor_lite").is_none_or(Value::is_null));
    assert_eq!(v["counts"]["candidates"], 2);

    let o = run(&[
        "evaluate",
        "--candidates",
        s(&p.join("cand.json")),
        "--references",
        s(&p.join("refs.json")),
        "--metrics",
        "bertscore",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn version_lists_templates() {
    let o = run(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("templates:"), "{out}");
    assert!(out.contains("captioning-ko"), "{out}");
    assert!(out.contains("tst-fr"), "{out}");
}
