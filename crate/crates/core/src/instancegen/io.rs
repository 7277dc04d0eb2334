//! Line-delimited JSON dataset files.
//!
//! Line 1 is a header record carrying the schema name and version, the
//! domain, role, size class, seed and instance count. Each following line is
//! one instance. Floats are written in shortest round-trip form, so a reload
//! is bit-identical.

use super::{Dataset, Instance, Role};
use crate::domain::Domain;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;
const SCHEMA_NAME: &str = "ahd-dataset";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    Version { path: PathBuf, found: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    schema_version: u32,
    domain: Domain,
    role: Role,
    size: usize,
    seed: u64,
    count: usize,
}

/// `<root>/data/<domain>/<role>_<N>_<seed>.jsonl`
pub fn dataset_path(root: &Path, domain: Domain, role: Role, size: usize, seed: u64) -> PathBuf {
    root.join("data")
        .join(domain.tag())
        .join(format!("{}_{}_{}.jsonl", role.tag(), size, seed))
}

fn to_bytes(dataset: &Dataset) -> Vec<u8> {
    let header = Header {
        schema: SCHEMA_NAME.to_string(),
        schema_version: SCHEMA_VERSION,
        domain: dataset.domain,
        role: dataset.role,
        size: dataset.size,
        seed: dataset.seed,
        count: dataset.instances.len(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for inst in &dataset.instances {
        serde_json::to_writer(&mut out, inst).expect("instance serializes");
        out.push(b'\n');
    }
    out
}

pub(super) fn checksum_of(dataset: &Dataset) -> String {
    hex::encode(Sha256::digest(to_bytes(dataset)))
}

/// Writes the dataset, creating parent directories. Returns the file checksum.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<String, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let bytes = to_bytes(dataset);
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |message: String| DatasetError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| schema("empty file".into()))?;
    let probe: serde_json::Value =
        serde_json::from_str(first).map_err(|e| schema(format!("header: {e}")))?;
    if probe.get("schema").and_then(|s| s.as_str()) != Some(SCHEMA_NAME) {
        return Err(schema("missing `ahd-dataset` schema tag".into()));
    }
    let version = probe
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| schema("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(DatasetError::Version {
            path: path.to_path_buf(),
            found: version as u32,
        });
    }
    let header: Header =
        serde_json::from_value(probe).map_err(|e| schema(format!("header: {e}")))?;
    let mut instances = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(line)
            .map_err(|e| schema(format!("instance record {}: {e}", i + 1)))?;
        instances.push(inst);
    }
    if instances.len() != header.count {
        return Err(schema(format!(
            "header declares {} instances, found {}",
            header.count,
            instances.len()
        )));
    }
    if !text.ends_with('\n') {
        return Err(schema("file is truncated (no trailing newline)".into()));
    }
    Ok(Dataset {
        domain: header.domain,
        role: header.role,
        size: header.size,
        seed: header.seed,
        instances,
    })
}
