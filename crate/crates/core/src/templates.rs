//! Versioned prompt and history-summary templates.
//!
//! Templates are plain text with `{name}` placeholders. The built-in set is
//! compiled in from `templates/v1/`; a directory with the same file names can
//! replace it at runtime.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {0:?} is missing")]
    TemplateMissing(String),
    #[error("template {template:?} uses unbound placeholder {{{name}}}")]
    UnboundPlaceholder { template: String, name: String },
    #[error("reading template directory: {0}")]
    Io(#[from] std::io::Error),
}

const BUILTIN: &[(&str, &str)] = &[
    ("system_setup1", include_str!("../templates/v1/system_setup1.txt")),
    ("system_setup2", include_str!("../templates/v1/system_setup2.txt")),
    ("system_setup3", include_str!("../templates/v1/system_setup3.txt")),
    ("user_setup1", include_str!("../templates/v1/user_setup1.txt")),
    ("user_setup2", include_str!("../templates/v1/user_setup2.txt")),
    ("user_declare_setup3", include_str!("../templates/v1/user_declare_setup3.txt")),
    ("user_act_setup3", include_str!("../templates/v1/user_act_setup3.txt")),
    ("history_empty", include_str!("../templates/v1/history_empty.txt")),
    ("history_setup1", include_str!("../templates/v1/history_setup1.txt")),
    ("history_setup2", include_str!("../templates/v1/history_setup2.txt")),
    ("history_setup3", include_str!("../templates/v1/history_setup3.txt")),
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    version: String,
    templates: BTreeMap<String, String>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            version: TEMPLATE_VERSION.to_string(),
            templates: BUILTIN
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Loads every `*.txt` file in `dir`, keyed by file stem.
    pub fn from_dir(dir: &Path, version: impl Into<String>) -> Result<Self, TemplateError> {
        let mut templates = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    templates.insert(stem.to_string(), fs::read_to_string(&path)?);
                }
            }
        }
        Ok(Self {
            version: version.into(),
            templates,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, key: &str) -> Result<&str, TemplateError> {
        self.templates
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| TemplateError::TemplateMissing(key.to_string()))
    }

    pub fn render(&self, key: &str, vars: &[(&str, String)]) -> Result<String, TemplateError> {
        let template = self.get(key)?;
        render_str(key, template, vars)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Substitutes `{name}` placeholders. Any placeholder without a binding is an
/// error; braces that do not enclose an identifier are copied through.
fn render_str(key: &str, template: &str, vars: &[(&str, String)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]);
        match name {
            Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == n)
                    .map(|(_, v)| v)
                    .ok_or_else(|| TemplateError::UnboundPlaceholder {
                        template: key.to_string(),
                        name: n.to_string(),
                    })?;
                out.push_str(value);
                rest = &after[n.len() + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
