use std::collections::BTreeMap;
use std::path::Path;

use super::{PromptError, PromptTemplate};
use crate::corpus::Task;

const BUILTIN: &[&str] = &[
    include_str!("../../templates/captioning-en.toml"),
    include_str!("../../templates/captioning-ko.toml"),
    include_str!("../../templates/captioning-lv.toml"),
    include_str!("../../templates/tst-fr.toml"),
    include_str!("../../templates/tst-it.toml"),
    include_str!("../../templates/tst-pt.toml"),
];

/// Templates by id. Filled before a batch starts and read-only afterwards.
#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// A registry holding the shipped templates.
    pub fn with_builtins() -> Self {
        let mut reg = Self::default();
        for text in BUILTIN {
            let t = PromptTemplate::from_toml(text).expect("built-in template parses");
            reg.register(t).expect("built-in template is valid");
        }
        reg
    }

    pub fn register(&mut self, t: PromptTemplate) -> Result<(), PromptError> {
        if self.templates.contains_key(&t.id) {
            return Err(PromptError::DuplicateTemplateId(t.id));
        }
        t.validate()?;
        self.templates.insert(t.id.clone(), t);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Default template id for a task and target language code.
    pub fn default_id(task: Task, language_code: &str) -> String {
        format!("{}-{language_code}", task.as_str())
    }

    /// Looks `spec` up as an id first, then loads it as a `.toml` or `.json`
    /// template file.
    pub fn resolve(&mut self, spec: &str) -> Result<PromptTemplate, PromptError> {
        if let Some(t) = self.get(spec) {
            return Ok(t.clone());
        }
        let path = Path::new(spec);
        if !path.is_file() {
            return Err(PromptError::UnknownTemplate(spec.to_string()));
        }
        let t = load_template_file(path)?;
        match self.get(&t.id) {
            Some(existing) if *existing == t => {}
            _ => self.register(t.clone())?,
        }
        Ok(t)
    }
}

pub(crate) fn load_template_file(path: &Path) -> Result<PromptTemplate, PromptError> {
    let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let t = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => PromptTemplate::from_json(&text)?,
        _ => PromptTemplate::from_toml(&text)?,
    };
    t.validate()?;
    Ok(t)
}
