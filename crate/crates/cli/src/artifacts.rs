//! Run directories: atomic artifact writes, checksums and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use meanfield::snapshot::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
            passed: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunDir {
    root: PathBuf,
    artifacts: BTreeMap<String, ArtifactRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Atomically (re)write an artifact and record its checksum.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.path(name), bytes)?;
        self.artifacts.insert(
            name.to_string(),
            ArtifactRecord {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, mode: &str, config: &RunConfig, checks: Vec<Check>) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: "meanfield".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: mode.into(),
            config: config.clone(),
            artifacts: self.artifacts,
            passed: checks.iter().all(|c| c.passed),
            checks,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Load a manifest and confirm every listed artifact exists with the recorded checksum.
pub fn verify(root: &Path) -> Result<Manifest, CliError> {
    let mpath = root.join(MANIFEST);
    let bytes = fs::read(&mpath).map_err(|e| CliError::Integrity(format!("{}: {e}", mpath.display())))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Integrity(format!("unreadable manifest: {e}")))?;
    if manifest.artifacts.is_empty() {
        return Err(CliError::Integrity("manifest lists no artifacts".into()));
    }
    for (name, rec) in &manifest.artifacts {
        let data = fs::read(root.join(name)).map_err(|e| CliError::Integrity(format!("missing artifact {name}: {e}")))?;
        let sum = sha256_hex(&data);
        if sum != rec.sha256 || data.len() as u64 != rec.bytes {
            return Err(CliError::Integrity(format!("checksum mismatch for {name}")));
        }
    }
    Ok(manifest)
}

/// Round-trip formatting: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
