use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{annotate, AnnotateError};
use crate::backend::{BackendConfig, ChatBackend, Clock, Dispatcher, MockBackend, SimulatedClock};
use crate::corpus::{load_corpus, load_dataset, load_exclusions, save_dataset, DatasetMeta, LanguageTag, Task};
use crate::cost::{Money, TokenPricing};
use crate::fsutil::write_atomic;
use crate::parser::RefusalPatterns;
use crate::prompt::{PromptTemplate, TemplateRegistry};
use crate::TOOL_VERSION;

/// Timestamp stamped on mock-run datasets unless `created_at` is given, so
/// offline runs are reproducible byte for byte.
const MOCK_CREATED_AT: &str = "1970-01-01T00:00:00Z";

/// A batch run as described by a JSON (or `.toml`) config file. Relative paths
/// are taken relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Language code, e.g. `ko`.
    pub target_language: String,
    /// Template id or path; defaults to `<task>-<language>`.
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default)]
    pub n_paraphrases: Option<usize>,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Defaults to the output path with extension `exclusions.jsonl`.
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
    /// Defaults to the output path with extension `manifest.json`.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    /// Mock script; when set no network is used.
    #[serde(default)]
    pub mock: Option<PathBuf>,
    /// Re-attempt only the items listed in the exclusion log and merge them
    /// into the existing dataset.
    #[serde(default)]
    pub resume: bool,
    /// Fixed dataset timestamp (RFC 3339).
    #[serde(default)]
    pub created_at: Option<String>,
    #[serde(default)]
    pub refusal_patterns: Option<Vec<String>>,
    /// Price used for the summary's cost estimate.
    #[serde(default)]
    pub pricing: Option<TokenPricing>,
    #[serde(default)]
    pub backend: BackendConfig,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnnotateError + '_ {
    move |e| AnnotateError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, AnnotateError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| AnnotateError::Config(e.to_string()))?,
            _ => serde_json::from_str(&text).map_err(|e| AnnotateError::Config(e.to_string()))?,
        };
        cfg.resolve_relative(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_relative(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.input);
        join(&mut self.output);
        self.exclusions.as_mut().map(join);
        self.manifest.as_mut().map(join);
        self.mock.as_mut().map(join);
        if let Some(t) = &self.template {
            let candidate = base.join(t);
            if Path::new(t).is_relative() && TemplateRegistry::with_builtins().get(t).is_none() && candidate.is_file() {
                self.template = Some(candidate.display().to_string());
            }
        }
    }

    pub fn exclusions_path(&self) -> PathBuf {
        self.exclusions
            .clone()
            .unwrap_or_else(|| self.output.with_extension("exclusions.jsonl"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.output.with_extension("manifest.json"))
    }

    pub fn language(&self) -> Result<LanguageTag, AnnotateError> {
        Ok(LanguageTag::from_code(&self.target_language)?)
    }

    /// Resolves the template and checks it matches the task and language.
    pub fn template(&self) -> Result<PromptTemplate, AnnotateError> {
        let mut reg = TemplateRegistry::with_builtins();
        let spec = self
            .template
            .clone()
            .unwrap_or_else(|| TemplateRegistry::default_id(self.task, &self.target_language));
        let mut t = reg.resolve(&spec)?;
        if t.task != self.task {
            return Err(AnnotateError::Config(format!(
                "template {:?} is for {}, the run is {}",
                t.id, t.task, self.task
            )));
        }
        if t.target_language.code != self.target_language {
            return Err(AnnotateError::Config(format!(
                "template {:?} targets {:?}, the run targets {:?}",
                t.id, t.target_language.code, self.target_language
            )));
        }
        if let Some(n) = self.n_paraphrases {
            t = t.with_paraphrase_count(n);
            t.validate()?;
        }
        Ok(t)
    }

    fn refusal_patterns(&self) -> RefusalPatterns {
        match &self.refusal_patterns {
            Some(p) => RefusalPatterns::new(p),
            None => RefusalPatterns::default(),
        }
    }

    fn sha256(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Totals for a finished run. `annotated`/`excluded` describe the written
/// dataset; token figures cover this run's backend calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: Task,
    pub target_language: String,
    pub template_id: String,
    pub model_id: String,
    pub items: usize,
    /// Items sent to the backend in this run.
    pub attempted: usize,
    pub annotated: usize,
    pub excluded: usize,
    pub silver_annotations: usize,
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub usage_estimated: bool,
    pub estimated_cost: Money,
    pub output: PathBuf,
    pub exclusions: PathBuf,
    pub manifest: PathBuf,
}

/// Provenance of a run, written next to the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub model_id: String,
    pub template_id: String,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_base_url: Option<String>,
    pub temperature: f64,
    pub patience: u32,
    pub started_at: String,
    pub finished_at: String,
    pub dataset_created_at: String,
    pub resumed: bool,
    pub summary: RunSummary,
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Loads a run config and executes it, with the mock backend and a simulated
/// clock when `mock` is set, and the HTTP backend otherwise.
pub fn run_batch(config_path: &Path) -> Result<RunSummary, AnnotateError> {
    let cfg = RunConfig::from_file(config_path)?;
    run_config(&cfg)
}

/// Executes an already loaded config with the backend it names.
pub fn run_config(cfg: &RunConfig) -> Result<RunSummary, AnnotateError> {
    if let Some(script) = &cfg.mock {
        let backend = MockBackend::from_file(script)?;
        return run_batch_with(cfg, &backend, &SimulatedClock::new());
    }
    #[cfg(feature = "http")]
    {
        cfg.backend.validate()?;
        let backend = crate::backend::HttpBackend::new(&cfg.backend)?;
        run_batch_with(cfg, &backend, &crate::backend::SystemClock::new())
    }
    #[cfg(not(feature = "http"))]
    Err(AnnotateError::Config(
        "built without the http feature; only mock runs are available".into(),
    ))
}

/// Executes a run against the given backend and clock.
pub fn run_batch_with(cfg: &RunConfig, backend: &dyn ChatBackend, clock: &dyn Clock) -> Result<RunSummary, AnnotateError> {
    let started_at = now_rfc3339();
    let language = cfg.language()?;
    let template = cfg.template()?;
    let dispatcher = Dispatcher::new(backend, cfg.backend.clone(), clock)?;
    let items = load_corpus(&cfg.input, cfg.task)?;
    let exclusions_path = cfg.exclusions_path();
    let manifest_path = cfg.manifest_path();

    let mut created_at = cfg
        .created_at
        .clone()
        .or_else(|| cfg.mock.as_ref().map(|_| MOCK_CREATED_AT.to_string()));
    let (to_run, mut records) = if cfg.resume {
        let retry: HashSet<String> = load_exclusions(&exclusions_path)?.into_iter().map(|e| e.id).collect();
        let existing = if cfg.output.exists() {
            load_dataset(&cfg.output)?
        } else if retry.is_empty() {
            return Err(AnnotateError::Config(format!(
                "nothing to resume: neither {} nor {} exists",
                cfg.output.display(),
                exclusions_path.display()
            )));
        } else {
            Default::default()
        };
        if let Some(meta) = &existing.meta {
            if meta.task != cfg.task || meta.target_language != language {
                return Err(AnnotateError::Config(format!(
                    "{} holds a {} dataset in {}, the run is {} in {}",
                    cfg.output.display(),
                    meta.task,
                    meta.target_language.code(),
                    cfg.task,
                    language.code()
                )));
            }
            created_at = created_at.or_else(|| Some(meta.created_at.clone()));
        }
        let known: HashSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
        if let Some(missing) = retry.iter().find(|id| !known.contains(id.as_str())) {
            return Err(AnnotateError::Config(format!(
                "excluded id {missing:?} is not in {}",
                cfg.input.display()
            )));
        }
        let to_run: Vec<_> = items.iter().filter(|i| retry.contains(&i.id)).cloned().collect();
        let kept: Vec<_> = existing.records.into_iter().filter(|r| !retry.contains(r.id())).collect();
        log::info!("resuming {} excluded item(s), keeping {} record(s)", to_run.len(), kept.len());
        (to_run, kept)
    } else {
        (items.clone(), Vec::new())
    };

    let run = annotate(&to_run, &template, &dispatcher, &cfg.refusal_patterns(), None)?;
    records.extend(run.records.iter().cloned());
    records.sort_by(|a, b| a.id().cmp(b.id()));

    let meta = DatasetMeta {
        task: cfg.task,
        target_language: language,
        created_at: created_at.unwrap_or_else(now_rfc3339),
        tool_version: TOOL_VERSION.to_string(),
    };
    save_dataset(&records, &meta, &cfg.output, &exclusions_path)?;

    let annotated = records.iter().filter(|r| !r.is_excluded()).count();
    let summary = RunSummary {
        task: cfg.task,
        target_language: cfg.target_language.clone(),
        template_id: template.id.clone(),
        model_id: cfg.backend.model_id.clone(),
        items: items.len(),
        attempted: to_run.len(),
        annotated,
        excluded: records.len() - annotated,
        silver_annotations: records.iter().map(|r| r.silver.len()).sum(),
        calls: run.calls,
        prompt_tokens: run.usage.prompt_tokens,
        completion_tokens: run.usage.completion_tokens,
        usage_estimated: run.usage.estimated,
        estimated_cost: cfg
            .pricing
            .unwrap_or_default()
            .cost(run.usage.prompt_tokens, run.usage.completion_tokens),
        output: cfg.output.clone(),
        exclusions: exclusions_path,
        manifest: manifest_path.clone(),
    };
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_sha256: cfg.sha256(),
        model_id: cfg.backend.model_id.clone(),
        template_id: template.id.clone(),
        backend: if cfg.mock.is_some() { "mock" } else { "http" }.to_string(),
        api_base_url: cfg.mock.is_none().then(|| cfg.backend.api_base_url.clone()),
        temperature: cfg.backend.temperature,
        patience: cfg.backend.patience,
        started_at,
        finished_at: now_rfc3339(),
        dataset_created_at: meta.created_at.clone(),
        resumed: cfg.resume,
        summary: summary.clone(),
    };
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    body.push('\n');
    write_atomic(&manifest_path, body.as_bytes()).map_err(io_err(&manifest_path))?;
    log::info!(
        "run finished: {} annotated, {} excluded, {} call(s)",
        summary.annotated,
        summary.excluded,
        summary.calls
    );
    Ok(summary)
}
