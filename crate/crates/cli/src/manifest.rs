//! Run manifests: a JSON record of everything needed to repeat a run.

use std::path::Path;

use chrono::{SecondsFormat, Utc};
use frameguard::BackendDescriptor;
use serde::{Deserialize, Serialize};

use crate::commands::CommandConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: CommandConfig,
    pub backend: Option<BackendDescriptor>,
    pub started_at: String,
    pub finished_at: String,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("not a run manifest: {e}")))
    }
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}
