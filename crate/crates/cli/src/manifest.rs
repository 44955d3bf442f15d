use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::formats::{to_json, SCHEMA_VERSION};

/// Written next to every output as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Full argument list; re-running it reproduces the outputs.
    pub arguments: Vec<String>,
    pub profile_ids: Vec<String>,
    pub seed: Option<u64>,
    pub counts: BTreeMap<String, u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, arguments: &[String]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            arguments: arguments.to_vec(),
            profile_ids: Vec::new(),
            seed: None,
            counts: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
        }
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_for(&self, output: &Path) -> Result<PathBuf, CliError> {
        let path = Self::path_for(output);
        let mut text = to_json(self);
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = crate::formats::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

fn timestamp() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return epoch;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
