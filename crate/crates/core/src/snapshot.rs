//! Raw field snapshots: little-endian `f64`, row-major, plus a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::TorusGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub name: String,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
}

/// Write `bytes` to a sibling temp file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(field: &ScalarField) -> Vec<u8> {
    field.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_snapshot(path: &Path, field: &ScalarField, meta: &SnapshotMeta) -> Result<()> {
    if meta.n != field.n() {
        return Err(Error::GridMismatch {
            left: meta.n,
            right: field.n(),
        });
    }
    write_atomic(path, &encode(field))?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(meta)?.as_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(ScalarField, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    let grid = TorusGrid::new(meta.n)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::InvalidParameter {
            name: "snapshot",
            reason: format!("{} bytes for n = {}", bytes.len(), meta.n),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((ScalarField::from_values(&grid, values)?, meta))
}
