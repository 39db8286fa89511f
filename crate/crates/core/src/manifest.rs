//! Run manifest: what produced the files in an output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    /// Emitted files relative to the output directory, sorted.
    pub files: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects emitted files while a command runs.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
    started: u64,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `name` (relative) and records it.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> std::io::Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(path)
    }

    /// Writes the manifest, which lists itself too.
    pub fn finish(mut self, command: &str, config_hash: &str) -> std::io::Result<RunManifest> {
        if !self.files.iter().any(|f| f == MANIFEST_FILE) {
            self.files.push(MANIFEST_FILE.into());
        }
        self.files.sort();
        let m = RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_unix_s: self.started,
            finished_unix_s: now(),
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        std::fs::write(self.root.join(MANIFEST_FILE), text + "\n")?;
        Ok(m)
    }
}
