use std::fs;
use std::path::{Path, PathBuf};

use frameguard::{decode_labelmap, BackendDescriptor, LabelMap, LatentCode};

use crate::commands::CommandConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{now, RunManifest, MANIFEST_FILE};

/// An output directory that remembers what was written into it.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
    started_at: String,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started_at: now(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, config: CommandConfig, backend: Option<BackendDescriptor>) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            tool: "frameguard".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            backend,
            started_at: self.started_at,
            finished_at: now(),
            outputs: self.written,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

pub fn read_labelmap(path: &Path) -> CliResult<LabelMap> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_labelmap(&bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_latent(path: &Path) -> CliResult<LatentCode> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, format!("expected a JSON array of numbers: {e}")))
}

pub fn read_latents(path: &Path) -> CliResult<Vec<LatentCode>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::io(path, format!("expected a JSON array of latent arrays: {e}")))
}

pub fn latent_json(z: &LatentCode) -> String {
    serde_json::to_string(z).expect("latent serialises") + "\n"
}

pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}
