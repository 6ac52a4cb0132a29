use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// What a run read and wrote. Holds no clock readings, so reruns produce
/// the same bytes; the embedded config can be passed back via `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub versions: BTreeMap<String, String>,
    pub config: RunConfig,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serialises").as_bytes())
}

/// Collects a command's artefacts and writes them with the manifest.
pub struct RunWriter {
    dir: PathBuf,
    command: Vec<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunWriter {
    pub fn new(dir: &Path, command: &[&str]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.iter().map(|s| s.to_string()).collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_ref()),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialise");
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            versions: BTreeMap::from([("gridcause".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
            config: cfg.clone(),
            command: self.command.clone(),
        };
        let name = format!("manifest_{}.json", self.command.join("_"));
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
