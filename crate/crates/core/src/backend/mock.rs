use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatExchange, ChatRequest, RequestContext, Usage};

/// Scripted failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockError {
    Transport,
    RateLimited {
        #[serde(default)]
        retry_after_ms: Option<u64>,
    },
    Api {
        status: u16,
        #[serde(default)]
        body: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum ErrorSpec {
    Short(String),
    Full(MockError),
}

/// What the mock does on one attempt: wait `delay_ms`, then return `text`
/// (or the contents of `text_file`) or fail with `error`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<ErrorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<u64>,
}

impl MockStep {
    pub fn text(t: &str) -> Self {
        Self {
            text: Some(t.into()),
            ..Self::default()
        }
    }

    pub fn error(e: MockError) -> Self {
        Self {
            error: Some(ErrorSpec::Full(e)),
            ..Self::default()
        }
    }

    pub fn with_delay(mut self, ms: u64) -> Self {
        self.delay_ms = Some(ms);
        self
    }

    fn mock_error(&self) -> Result<Option<MockError>, BackendError> {
        match &self.error {
            None => Ok(None),
            Some(ErrorSpec::Full(e)) => Ok(Some(e.clone())),
            Some(ErrorSpec::Short(s)) => match s.as_str() {
                "transport" => Ok(Some(MockError::Transport)),
                "rate_limited" => Ok(Some(MockError::RateLimited { retry_after_ms: None })),
                other => Err(BackendError::Script(format!("unknown error kind {other:?}"))),
            },
        }
    }

    fn check(&self) -> Result<(), BackendError> {
        let outcomes = [self.text.is_some(), self.text_file.is_some(), self.error.is_some()];
        if outcomes.iter().filter(|b| **b).count() != 1 {
            return Err(BackendError::Script(
                "each step needs exactly one of text, text_file, error".into(),
            ));
        }
        self.mock_error().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Steps {
    One(MockStep),
    Many(Vec<MockStep>),
}

impl Steps {
    fn as_slice(&self) -> &[MockStep] {
        match self {
            Steps::One(s) => std::slice::from_ref(s),
            Steps::Many(v) => v,
        }
    }

    fn as_mut_slice(&mut self) -> &mut [MockStep] {
        match self {
            Steps::One(s) => std::slice::from_mut(s),
            Steps::Many(v) => v,
        }
    }
}

/// Per-attempt behaviour of the mock backend.
///
/// ```json
/// {
///   "default": {"text_file": "ok.txt"},
///   "jobs": {"3": [{"error": "transport"}, {"text": "..."}]},
///   "ids": {"img_7": {"text": "I don't know"}}
/// }
/// ```
///
/// Steps are looked up by job id, then by job index, then `default`; the k-th
/// attempt uses the k-th step and the last step repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<Steps>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    jobs: BTreeMap<String, Steps>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    ids: BTreeMap<String, Steps>,
}

impl MockScript {
    pub fn for_all(steps: Vec<MockStep>) -> Self {
        Self {
            default: Some(Steps::Many(steps)),
            ..Self::default()
        }
    }

    pub fn with_id(mut self, id: &str, steps: Vec<MockStep>) -> Self {
        self.ids.insert(id.into(), Steps::Many(steps));
        self
    }

    pub fn with_index(mut self, index: usize, steps: Vec<MockStep>) -> Self {
        self.jobs.insert(index.to_string(), Steps::Many(steps));
        self
    }

    /// Parses a script, reading `text_file` entries relative to `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, BackendError> {
        let mut script: MockScript =
            serde_json::from_str(text).map_err(|e| BackendError::Script(e.to_string()))?;
        for key in script.jobs.keys() {
            key.parse::<usize>()
                .map_err(|_| BackendError::Script(format!("job key {key:?} is not an index")))?;
        }
        let all = script
            .default
            .iter_mut()
            .chain(script.jobs.values_mut())
            .chain(script.ids.values_mut());
        for steps in all {
            if steps.as_slice().is_empty() {
                return Err(BackendError::Script("empty step list".into()));
            }
            for step in steps.as_mut_slice() {
                step.check()?;
                if let Some(file) = step.text_file.take() {
                    let path = base_dir.join(&file);
                    let body = std::fs::read_to_string(&path)
                        .map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
                    step.text = Some(body);
                }
            }
        }
        Ok(script)
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn step(&self, ctx: &RequestContext) -> Option<&MockStep> {
        let steps = self
            .ids
            .get(&ctx.job_id)
            .or_else(|| self.jobs.get(&ctx.job_index.to_string()))
            .or(self.default.as_ref())?
            .as_slice();
        let k = (ctx.attempt.max(1) as usize - 1).min(steps.len().checked_sub(1)?);
        steps.get(k)
    }
}

/// Backend that replays a [`MockScript`] and counts what it was asked.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    calls: Mutex<HashMap<String, u32>>,
    total: AtomicUsize,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(MockScript::from_file(path)?))
    }

    /// Calls made for one job id.
    pub fn calls(&self, job_id: &str) -> u32 {
        self.calls.lock().expect("mock lock").get(job_id).copied().unwrap_or(0)
    }

    pub fn calls_by_id(&self) -> HashMap<String, u32> {
        self.calls.lock().expect("mock lock").clone()
    }

    pub fn total_calls(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    /// Most requests ever in flight at once.
    pub fn max_in_flight(&self) -> usize {
        self.high_water.load(Ordering::SeqCst)
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, ctx: &RequestContext, req: &ChatRequest) -> Result<ChatExchange, BackendError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        let _guard = InFlight(&self.in_flight);
        self.high_water.fetch_max(now, Ordering::SeqCst);
        self.total.fetch_add(1, Ordering::SeqCst);
        *self.calls.lock().expect("mock lock").entry(ctx.job_id.clone()).or_default() += 1;

        let step = self
            .script
            .step(ctx)
            .ok_or_else(|| BackendError::Script(format!("no step for job {:?}", ctx.job_id)))?;
        let latency = Duration::from_millis(step.delay_ms.unwrap_or(0));
        if !latency.is_zero() {
            std::thread::sleep(latency);
        }
        if let Some(e) = step.mock_error()? {
            return Err(match e {
                MockError::Transport => BackendError::Transport("scripted transport failure".into()),
                MockError::RateLimited { retry_after_ms } => BackendError::RateLimited {
                    retry_after: retry_after_ms.map(Duration::from_millis),
                },
                MockError::Api { status, body } => BackendError::Api { status, body },
            });
        }
        let response = step
            .text
            .clone()
            .ok_or_else(|| BackendError::Script("text_file was not loaded".into()))?;
        Ok(ChatExchange {
            usage: Usage::estimate(req, &response),
            request: req.clone(),
            response,
            latency,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Role, ChatMessage};

    fn ctx(index: usize, id: &str, attempt: u32) -> RequestContext {
        RequestContext {
            job_index: index,
            job_id: id.into(),
            attempt,
        }
    }

    fn req() -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: "Input: a dog".into(),
            }],
            temperature: 1.0,
            max_tokens: 10,
        }
    }

    #[test]
    fn script_file_resolution_and_precedence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ok.txt"), "Translation: 개").unwrap();
        std::fs::write(
            dir.path().join("script.json"),
            r#"{
                "default": {"text_file": "ok.txt"},
                "jobs": {"1": [{"error": "rate_limited"}, {"text": "second"}]},
                "ids": {"x": {"error": {"kind": "api", "status": 500, "body": "boom"}}}
            }"#,
        )
        .unwrap();
        let mock = MockBackend::from_file(&dir.path().join("script.json")).unwrap();
        let ex = mock.complete(&ctx(0, "a", 1), &req()).unwrap();
        assert_eq!(ex.response, "Translation: 개");
        assert!(ex.usage.estimated);
        assert_eq!(ex.usage.prompt_tokens, 4);
        assert!(matches!(
            mock.complete(&ctx(1, "b", 1), &req()),
            Err(BackendError::RateLimited { retry_after: None })
        ));
        assert_eq!(mock.complete(&ctx(1, "b", 2), &req()).unwrap().response, "second");
        assert_eq!(mock.complete(&ctx(1, "b", 3), &req()).unwrap().response, "second");
        assert_eq!(
            mock.complete(&ctx(1, "x", 1), &req()),
            Err(BackendError::Api { status: 500, body: "boom".into() })
        );
        assert_eq!(mock.calls("b"), 3);
        assert_eq!(mock.total_calls(), 5);
        assert_eq!(mock.max_in_flight(), 1);
    }

    #[test]
    fn invalid_scripts() {
        let base = Path::new(".");
        for bad in [
            r#"{"default": {}}"#,
            r#"{"default": {"text": "a", "error": "transport"}}"#,
            r#"{"default": {"error": "explode"}}"#,
            r#"{"default": []}"#,
            r#"{"jobs": {"first": {"text": "a"}}}"#,
            r#"{"default": {"text_file": "does/not/exist.txt"}}"#,
            r#"{"defaults": {"text": "a"}}"#,
        ] {
            assert!(matches!(MockScript::from_json(bad, base), Err(BackendError::Script(_))), "{bad}");
        }
    }

    #[test]
    fn unscripted_job_is_an_error() {
        let mock = MockBackend::new(MockScript::default().with_id("a", vec![MockStep::text("x")]));
        assert!(matches!(mock.complete(&ctx(0, "b", 1), &req()), Err(BackendError::Script(_))));
    }
}
