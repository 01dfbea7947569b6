use std::path::Path;

use serde_json::{Map, Value};

use crate::config::PipelineConfig;
use crate::{CliError, StageExt};

/// Tool version plus config hash, written into every output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub version: String,
    pub config_sha256: String,
}

impl Stamp {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            version: chc_core::VERSION.to_string(),
            config_sha256: config.hash(),
        }
    }

    /// Metadata string for binary containers.
    pub fn line(&self) -> String {
        format!("chc {} config-sha256 {}", self.version, self.config_sha256)
    }

    /// Prepends a `# ...` comment line to a CSV written by the library.
    pub fn csv(&self, path: &Path) -> Result<(), CliError> {
        let body = std::fs::read(path).stage("write")?;
        let mut out = format!("# {}\n", self.line()).into_bytes();
        out.extend_from_slice(&body);
        std::fs::write(path, out).stage("write")
    }

    /// Writes `fields` as pretty JSON behind `tool`, `version` and
    /// `config_sha256` keys.
    pub fn json(&self, path: &Path, fields: Value) -> Result<(), CliError> {
        let mut obj = Map::new();
        obj.insert("tool".into(), "chc".into());
        obj.insert("version".into(), self.version.clone().into());
        obj.insert("config_sha256".into(), self.config_sha256.clone().into());
        match fields {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("result".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values serialize");
        std::fs::write(path, text + "\n").stage("write")
    }
}
