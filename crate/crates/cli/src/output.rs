//! Atomic output: everything is staged in temporary files next to its
//! destination and renamed into place only once every file is written.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::CliError;

#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
        bytes.push(b'\n');
        self.add(path, bytes);
        Ok(())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            let dir = path
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::output(dir, e))?;
            tmp.write_all(&bytes).map_err(|e| CliError::output(&path, e))?;
            staged.push((tmp, path));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::output(&path, e.error))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sidecar record of what produced a command's outputs.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_digest: String,
    /// Input name to sha256 digest.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub graphs: BTreeMap<String, String>,
    /// The fully resolved experiment, defaults included.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub resolved: String,
}
