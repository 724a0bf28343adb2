//! Per-run output directories and their manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use semiclassical::config::Config;
use semiclassical::cutoff::CutoffSpec;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    /// Digest of the key-sorted configuration.
    pub config_sha256: String,
    pub config: Config,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub jobs: usize,
    /// Knots of the three ramps, when a ground-state set fixed them.
    pub cutoff: Option<CutoffSpec>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<FileEntry>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A directory owned by one invocation; records what it writes.
pub struct RunDir {
    root: PathBuf,
    written: BTreeMap<String, FileEntry>,
    started: u128,
}

impl RunDir {
    /// Creates `root`, clearing an earlier run there. A non-empty directory
    /// without a manifest is left alone.
    pub fn create(root: &Path) -> Result<RunDir, CliError> {
        if root.exists() {
            let empty = fs::read_dir(root)?.next().is_none();
            if !empty && !root.join(MANIFEST).is_file() {
                return Err(CliError::Usage(format!(
                    "{} exists and is not a previous run directory; refusing to overwrite",
                    root.display()
                )));
            }
            fs::remove_dir_all(root)?;
        }
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf(), written: BTreeMap::new(), started: now_ms() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn relative(&self, path: &Path) -> Result<String, CliError> {
        let rel = path
            .strip_prefix(&self.root)
            .map_err(|_| CliError::Internal(format!("{} is outside the run directory", path.display())))?;
        Ok(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"))
    }

    /// Registers a file written by someone else.
    pub fn adopt(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path)?;
        let rel = self.relative(path)?;
        let entry = FileEntry { path: rel.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) };
        self.written.insert(rel, entry);
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.adopt(&path)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Lists every file under the root, relative and sorted.
    fn walk(&self) -> Result<Vec<String>, CliError> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(self.relative(&p)?);
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Writes the manifest after checking that the directory holds exactly
    /// the recorded files.
    pub fn finish(self, head: ManifestHead) -> Result<PathBuf, CliError> {
        let present = self.walk()?;
        let recorded: Vec<String> = self.written.keys().cloned().collect();
        if present != recorded {
            let orphans: Vec<&String> = present.iter().filter(|p| !self.written.contains_key(*p)).collect();
            return Err(CliError::Internal(format!("unrecorded files in run directory: {orphans:?}")));
        }
        let manifest = RunManifest {
            command: head.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: head.config_sha256,
            config: head.config,
            seed: head.seed,
            eps: head.eps,
            jobs: head.jobs,
            cutoff: head.cutoff,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            files: self.written.into_values().collect(),
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Manifest fields known before the run ends.
pub struct ManifestHead {
    pub command: String,
    pub config_sha256: String,
    pub config: Config,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub jobs: usize,
    pub cutoff: Option<CutoffSpec>,
}
