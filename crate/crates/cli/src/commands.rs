use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use annolingo::annotator::{run_config, AnnotateError, RunConfig};
use annolingo::backend::BackendConfig;
use annolingo::corpus::{
    check_dataset, load_corpus, load_dataset, load_exclusions, split_dataset, write_records, CorpusError, SplitSpec,
    Task,
};
use annolingo::cost::{compare_report, group_thousands, CostError, CostModel, Mode, Money, TokenPricing};
use annolingo::metrics::{evaluate_dataset, parse_metrics, MetricError, MetricOptions, Smoothing};
use annolingo::prompt::TemplateRegistry;
use clap::CommandFactory;
use serde_json::{json, Value};
use thiserror::Error;

use crate::args::{AnnotateArgs, Cli, CostArgs, EvaluateArgs, Format, SplitArgs, ValidateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
/// Every item was excluded.
pub const EXIT_ALL_EXCLUDED: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0} problem(s) found")]
    Invalid(usize),
}

pub fn version_text() -> String {
    let ids: Vec<String> = TemplateRegistry::with_builtins().ids().map(str::to_string).collect();
    format!("{}\ntemplates: {}", annolingo::TOOL_VERSION, ids.join(", "))
}

fn subcommand_usage(name: &str) -> String {
    let mut cmd = Cli::command();
    cmd.find_subcommand_mut(name)
        .map(|c| c.render_usage().to_string())
        .unwrap_or_default()
}

fn usage(command: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{message}\n\n{}", subcommand_usage(command).replace("Usage: ", "Usage: annolingo ")))
}

fn annotate_config(a: AnnotateArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let missing = |flag: &str| usage("annotate", format!("--{flag} is required unless --config is given"));
            RunConfig {
                task: a.task.ok_or_else(|| missing("task"))?,
                target_language: a.target_lang.clone().ok_or_else(|| missing("target-lang"))?,
                template: None,
                n_paraphrases: None,
                input: a.input.clone().ok_or_else(|| missing("input"))?,
                output: a.output.clone().ok_or_else(|| missing("output"))?,
                exclusions: None,
                manifest: None,
                mock: None,
                resume: false,
                created_at: None,
                refusal_patterns: None,
                pricing: None,
                backend: BackendConfig::default(),
            }
        }
    };
    macro_rules! set {
        ($flag:expr => $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(a.task => cfg.task);
    set!(a.target_lang => cfg.target_language);
    set!(a.input => cfg.input);
    set!(a.output => cfg.output);
    set!(a.workers => cfg.backend.max_concurrency);
    set!(a.patience => cfg.backend.patience);
    set!(a.model => cfg.backend.model_id);
    set!(a.temperature => cfg.backend.temperature);
    if a.template.is_some() {
        cfg.template = a.template;
    }
    if a.n_paraphrases.is_some() {
        cfg.n_paraphrases = a.n_paraphrases;
    }
    if a.exclusions.is_some() {
        cfg.exclusions = a.exclusions;
    }
    if a.manifest.is_some() {
        cfg.manifest = a.manifest;
    }
    if a.requests_per_minute.is_some() {
        cfg.backend.requests_per_minute = a.requests_per_minute;
    }
    if a.created_at.is_some() {
        cfg.created_at = a.created_at;
    }
    if a.mock.is_some() {
        cfg.mock = a.mock;
    }
    cfg.resume |= a.resume;
    if cfg.mock.is_some() && (a.api_base.is_some() || a.api_key_env.is_some()) {
        return Err(usage(
            "annotate",
            "--mock runs offline and cannot be combined with --api-base or --api-key-env",
        ));
    }
    set!(a.api_base => cfg.backend.api_base_url);
    set!(a.api_key_env => cfg.backend.api_key_env);
    Ok(cfg)
}

pub fn annotate(a: AnnotateArgs) -> Result<u8, CliError> {
    let cfg = annotate_config(a)?;
    let summary = run_config(&cfg)?;
    eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(if summary.items > 0 && summary.annotated == 0 {
        EXIT_ALL_EXCLUDED
    } else {
        EXIT_OK
    })
}

pub fn split(a: SplitArgs) -> Result<u8, CliError> {
    let spec = SplitSpec::parse(&a.ratios, a.seed)?;
    let ds = load_dataset(&a.input)?;
    let meta = ds.meta.clone().ok_or(CorpusError::EmptyCorpus)?;
    let parts = split_dataset(&ds.records, &spec)?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<11} {:>9}  file", "part", "items");
    for (name, records) in [("train", &parts.train), ("validation", &parts.validation), ("test", &parts.test)] {
        let path = PathBuf::from(format!("{}{name}.json", a.out_prefix));
        write_records(records, &meta, &path)?;
        let _ = writeln!(out, "{name:<11} {:>9}  {}", group_thousands(records.len() as u64), path.display());
    }
    print!("{out}");
    Ok(EXIT_OK)
}

fn money_flag(flag: &str, s: &str) -> Result<Money, CliError> {
    s.parse()
        .map_err(|e: CostError| usage("cost", format!("--{flag}: {e}")))
}

fn cost_model(a: &CostArgs) -> Result<CostModel, CliError> {
    let mut m = CostModel::default();
    if let Some(p) = &a.human_per_gold {
        m.human_cost_per_gold = money_flag("human-per-gold", p)?;
    }
    if let Some(n) = a.golds_human {
        m.golds_per_item_human = n;
    }
    if let Some(n) = a.golds_assisted {
        m.golds_per_item_assisted = n;
    }
    if let Some(n) = a.tokens_per_item {
        m.tokens_per_item = n;
    }
    m.completion_tokens_per_item = a.completion_tokens;
    if let Some(p) = &a.price_1k {
        m.pricing = TokenPricing::Blended {
            per_1k: money_flag("price-1k", p)?,
        };
    }
    if let Some(s) = &a.split_pricing {
        let (p, c) = s
            .split_once(':')
            .ok_or_else(|| usage("cost", "--split-pricing takes PROMPT:COMPLETION prices"))?;
        m.pricing = TokenPricing::Split {
            prompt_per_1k: money_flag("split-pricing", p)?,
            completion_per_1k: money_flag("split-pricing", c)?,
        };
    }
    m.validate()?;
    Ok(m)
}

pub fn cost(a: CostArgs) -> Result<u8, CliError> {
    let m = cost_model(&a)?;
    let report = compare_report(&m, a.items)?;
    let budget = match &a.budget {
        Some(b) => {
            let amount = money_flag("budget", b)?;
            let mut cover = Vec::new();
            for mode in Mode::ALL {
                cover.push((mode, m.coverage_under_budget(amount, mode).ok()));
            }
            Some((amount, cover))
        }
        None => None,
    };
    match a.format {
        Format::Json => {
            let budget_json = budget.as_ref().map(|(amount, cover)| {
                let mut o = serde_json::Map::new();
                o.insert("amount".into(), json!(amount));
                for (mode, c) in cover {
                    let key = match mode {
                        Mode::HumanOnly => "human_only",
                        Mode::Assisted => "assisted",
                    };
                    o.insert(key.into(), json!(c));
                }
                Value::Object(o)
            });
            let body = json!({ "comparison": report, "budget": budget_json });
            println!("{}", serde_json::to_string_pretty(&body).expect("report serializes"));
        }
        Format::Table => {
            print!("{}", report.to_table());
            if let Some((amount, cover)) = budget {
                let parts: Vec<String> = cover
                    .iter()
                    .map(|(mode, c)| match c {
                        Some(c) => format!("{mode} {}", group_thousands(*c)),
                        None => format!("{mode} unbounded"),
                    })
                    .collect();
                println!("coverage under budget {}: {}", amount.grouped(), parts.join("; "));
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn evaluate(a: EvaluateArgs) -> Result<u8, CliError> {
    let metrics = parse_metrics(&a.metrics)?;
    let opts = MetricOptions {
        smoothing: if a.smooth { Smoothing::AddOne } else { Smoothing::None },
        per_sentence: a.per_sentence,
        ..MetricOptions::default()
    };
    let report = evaluate_dataset(&a.candidates, &a.references, &metrics, &opts)?;
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Table => print!("{}", report.to_table()),
    }
    Ok(EXIT_OK)
}

/// What a file to validate looks like, judged from its extension or first
/// record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    Dataset,
    Corpus(Task),
    Exclusions,
    Empty,
}

fn detect(path: &Path) -> Result<FileKind, CliError> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(FileKind::Exclusions);
    }
    let io = |message: String| CliError::Io {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| io(format!("not JSON: {e}")))?;
    let items = value.as_array().ok_or_else(|| io("expected a JSON array".into()))?;
    let Some(first) = items.first() else { return Ok(FileKind::Empty) };
    let has = |k: &str| first.get(k).is_some();
    if has("gold") {
        Ok(FileKind::Dataset)
    } else if has("gold_caption") {
        Ok(FileKind::Corpus(Task::Captioning))
    } else if has("informal") || has("formal") {
        Ok(FileKind::Corpus(Task::StyleTransfer))
    } else {
        Err(io("cannot tell what kind of file this is; pass --task for an input corpus".into()))
    }
}

pub fn validate(a: ValidateArgs) -> Result<u8, CliError> {
    let kind = match a.task {
        Some(t) => FileKind::Corpus(t),
        None => detect(&a.path)?,
    };
    let (count, what) = match kind {
        FileKind::Empty => (0, "records (empty array)".to_string()),
        FileKind::Corpus(task) => (load_corpus(&a.path, task)?.len(), format!("{task} corpus items")),
        FileKind::Exclusions => {
            let entries = load_exclusions(&a.path)?;
            let mut seen = HashSet::new();
            if let Some(e) = entries.iter().find(|e| !seen.insert(e.id.as_str())) {
                return Err(CorpusError::DuplicateId(e.id.clone()).into());
            }
            (entries.len(), "exclusion log entries".to_string())
        }
        FileKind::Dataset => {
            let check = check_dataset(&a.path)?;
            if !check.violations.is_empty() {
                for v in &check.violations {
                    eprintln!("{}: {v}", a.path.display());
                }
                return Err(CliError::Invalid(check.violations.len()));
            }
            (check.records, "dataset records".to_string())
        }
    };
    println!("ok: {}: {count} {what}", a.path.display());
    Ok(EXIT_OK)
}
