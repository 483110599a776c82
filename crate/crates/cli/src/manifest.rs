use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    /// Seconds per stage.
    pub timings: Vec<(String, f64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn entry(root: &Path, path: &Path) -> Result<FileEntry, CliError> {
    let bytes = std::fs::read(root.join(path))
        .map_err(|e| CliError::data(format!("cannot hash {}: {e}", path.display())))?;
    Ok(FileEntry {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Collects inputs, outputs and stage timings while a command runs.
pub struct Recorder {
    root: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Recorder {
    pub fn new(root: &Path, command: &str, config_path: Option<PathBuf>) -> Self {
        Recorder {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                arguments: std::env::args().skip(1).collect(),
                config_path,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
            },
            clock: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(entry(&self.root, path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.outputs.push(entry(&self.root, path)?);
        Ok(())
    }

    /// Closes the current stage.
    pub fn lap(&mut self, stage: &str) {
        let t = self.clock.elapsed().as_secs_f64();
        self.manifest.timings.push((stage.to_string(), t));
        self.clock = Instant::now();
    }

    pub fn finish(self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let rel = out_dir.join(format!("manifest_{}.json", self.manifest.command));
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(self.root.join(&rel), text)?;
        Ok(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
