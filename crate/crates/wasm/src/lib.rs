//! Browser bindings. Every export takes and returns JSON strings; the
//! `*_json` functions behind them are plain Rust and tested natively.

use annolingo::corpus::{LanguageTag, Task};
use annolingo::cost::{compare_report, CostModel, Mode, Money};
use annolingo::metrics::{
    align, meteor_sentence, rouge_l_sentence, tokenize, BleuStats, Smoothing, ROUGE_BETA, TOKENIZER_ID,
};
use annolingo::parser::{self, ParseError};
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostRequest {
    items: u64,
    #[serde(default)]
    budget: Option<String>,
    #[serde(default)]
    model: CostModel,
}

/// Human-only versus assisted cost for `items`, plus coverage under an
/// optional budget.
pub fn compare_costs_json(request: &str) -> Result<String, String> {
    let req: CostRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let report = compare_report(&req.model, req.items).map_err(|e| e.to_string())?;
    let budget = match req.budget {
        Some(b) => {
            let amount: Money = b.parse().map_err(|e: annolingo::cost::CostError| e.to_string())?;
            let cover = |mode| req.model.coverage_under_budget(amount, mode).ok();
            Some(json!({
                "amount": amount,
                "human_only": cover(Mode::HumanOnly),
                "assisted": cover(Mode::Assisted),
            }))
        }
        None => None,
    };
    Ok(json!({ "table": report.to_table(), "report": report, "budget": budget }).to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRequest {
    candidate: String,
    references: Vec<String>,
    #[serde(default)]
    smoothing: Smoothing,
}

/// Sentence-level BLEU, ROUGE-L and METEOR-lite for one candidate, with the
/// tokens each metric saw.
pub fn score_sentence_json(request: &str) -> Result<String, String> {
    let req: ScoreRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let refs: Vec<String> = req.references.into_iter().filter(|r| !r.trim().is_empty()).collect();
    if refs.is_empty() {
        return Err("at least one non-empty reference is needed".into());
    }
    let lang = LanguageTag::from_code("und").map_err(|e| e.to_string())?;
    let cand = tokenize(&req.candidate, &lang).tokens;
    let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r, &lang).tokens).collect();
    let slices: Vec<&[String]> = ref_tokens.iter().map(Vec::as_slice).collect();
    let alignments: Vec<Value> = slices
        .iter()
        .map(|r| {
            let a = align(&cand, r);
            json!({ "matches": a.matches(), "chunks": a.chunks })
        })
        .collect();
    let stats = BleuStats::for_sentence(&cand, &slices);
    Ok(json!({
        "tokenizer": TOKENIZER_ID,
        "tokens": { "candidate": cand, "references": ref_tokens },
        "bleu": stats.score(req.smoothing),
        "ngram_matches": stats.matches,
        "ngram_totals": stats.totals,
        "rouge_l": { "beta": ROUGE_BETA, "score": rouge_l_sentence(&cand, &slices, ROUGE_BETA) },
        "meteor_lite": meteor_sentence(&cand, &slices),
        "alignments": alignments,
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParseRequest {
    task: String,
    text: String,
    #[serde(default)]
    n_paraphrases: Option<usize>,
    /// English-only paraphrase output.
    #[serde(default)]
    monolingual: bool,
}

fn parse_result(raw: &str, task: Task, n: usize, monolingual: bool) -> Result<Value, ParseError> {
    Ok(match task {
        Task::Captioning if monolingual => json!({ "paraphrases": parser::parse_monolingual(raw, n)? }),
        Task::Captioning => {
            let p = parser::parse_captioning(raw, n)?;
            let pairs: Vec<Value> = p
                .paraphrases
                .iter()
                .map(|q| json!({ "english": q.english, "target": q.target }))
                .collect();
            json!({ "translation": p.translation, "paraphrases": pairs })
        }
        Task::StyleTransfer => {
            let p = parser::parse_tst_n(raw, n)?;
            let pair = |t: &parser::TextPair| json!({ "formal": t.formal, "informal": t.informal });
            json!({
                "translation_language": p.translation_language,
                "paraphrases": p.paraphrases.iter().map(pair).collect::<Vec<_>>(),
                "translations": p.translations.iter().map(pair).collect::<Vec<_>>(),
            })
        }
    })
}

/// Parses a model completion. A completion that does not parse is a normal
/// result (`"ok": false` with the error); only a bad request is an `Err`.
pub fn parse_completion_json(request: &str) -> Result<String, String> {
    let req: ParseRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let task: Task = req.task.parse()?;
    let n = req.n_paraphrases.unwrap_or(match task {
        Task::Captioning => 4,
        Task::StyleTransfer => 1,
    });
    Ok(match parse_result(&req.text, task, n, req.monolingual) {
        Ok(Value::Object(mut fields)) => {
            fields.insert("ok".into(), true.into());
            Value::Object(fields).to_string()
        }
        Ok(other) => json!({ "ok": true, "value": other }).to_string(),
        Err(e) => json!({ "ok": false, "error": e.to_string() }).to_string(),
    })
}

#[wasm_bindgen(js_name = compareCosts)]
pub fn compare_costs(request: &str) -> Result<String, JsError> {
    compare_costs_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scoreSentence)]
pub fn score_sentence(request: &str) -> Result<String, JsError> {
    score_sentence_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = parseCompletion)]
pub fn parse_completion(request: &str) -> Result<String, JsError> {
    parse_completion_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn version() -> String {
    annolingo::TOOL_VERSION.to_string()
}
