use std::fmt;

use rdv_core::RdvError;

/// Error carried to the process boundary. Rendered as one JSON object per
/// line on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            field: None,
            message: message.into(),
        }
    }

    pub fn config_field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    /// The single-line diagnostic.
    pub fn diagnostic(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("level".into(), "error".into());
        obj.insert("kind".into(), self.kind.into());
        if let Some(f) = &self.field {
            obj.insert("field".into(), f.clone().into());
        }
        obj.insert("message".into(), self.message.clone().into());
        serde_json::Value::Object(obj).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{}: {field} {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<RdvError> for CliError {
    fn from(e: RdvError) -> Self {
        let kind = match &e {
            RdvError::Config(_) => "config",
            RdvError::NonConvergence { .. } => "solver",
            RdvError::Domain { .. } => "domain",
            RdvError::Data { .. } => "data",
            RdvError::Input(_) => "input",
        };
        Self::new(kind, e.to_string())
    }
}
