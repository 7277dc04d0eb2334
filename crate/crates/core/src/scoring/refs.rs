//! Reference optima files for oracle-sized datasets.

use super::oracles::{exact_mkp, exact_op, exact_routing, exact_tsp, TooLarge};
use crate::domain::Domain;
use crate::instancegen::{Dataset, Instance, Role};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

const SCHEMA_NAME: &str = "ahd-refs";
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub id: String,
    pub optimum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub schema: String,
    pub schema_version: u32,
    pub domain: Domain,
    pub role: Role,
    pub size: usize,
    pub seed: u64,
    /// Checksum of the dataset the optima were computed on.
    pub dataset_checksum: String,
    pub entries: Vec<ReferenceEntry>,
}

impl ReferenceFile {
    pub fn optimum(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.optimum)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RefsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed reference file {path}: {message}")]
    Schema { path: PathBuf, message: String },
}

/// Exact optimum of one instance with the oracle matching `domain`.
pub fn exact_optimum(domain: Domain, instance: &Instance) -> Result<f64, TooLarge> {
    match (domain, instance) {
        (_, Instance::Euclidean(e)) => exact_tsp(&e.distance_matrix()),
        (Domain::OvrpC, Instance::Routing(r)) => exact_routing(r, true),
        (_, Instance::Routing(r)) => exact_routing(r, false),
        (_, Instance::Orienteering(o)) => exact_op(o),
        (_, Instance::Knapsack(k)) => exact_mkp(k),
    }
}

pub fn compute_references(dataset: &Dataset) -> Result<ReferenceFile, TooLarge> {
    // size guard before any heavy work
    if let Some(first) = dataset.instances.first() {
        let probe = match first {
            Instance::Euclidean(e) => e.n() <= super::TSP_ORACLE_MAX,
            Instance::Routing(r) => r.base.n() - 1 <= super::ROUTING_ORACLE_MAX,
            Instance::Orienteering(o) => o.base.n() - 1 <= super::OP_ORACLE_MAX,
            Instance::Knapsack(k) => k.n() <= super::MKP_ORACLE_MAX,
        };
        if !probe {
            exact_optimum(dataset.domain, first)?;
        }
    }
    let optima: Vec<f64> = dataset
        .instances
        .par_iter()
        .map(|inst| exact_optimum(dataset.domain, inst))
        .collect::<Result<_, _>>()?;
    Ok(ReferenceFile {
        schema: SCHEMA_NAME.into(),
        schema_version: SCHEMA_VERSION,
        domain: dataset.domain,
        role: dataset.role,
        size: dataset.size,
        seed: dataset.seed,
        dataset_checksum: dataset.checksum(),
        entries: dataset
            .instances
            .iter()
            .zip(optima)
            .map(|(inst, optimum)| ReferenceEntry {
                id: inst.id().to_string(),
                optimum,
            })
            .collect(),
    })
}

/// `<root>/refs/<domain>_<N>_<seed>.json`
pub fn references_path(root: &Path, domain: Domain, size: usize, seed: u64) -> PathBuf {
    root.join("refs").join(format!("{}_{}_{}.json", domain.tag(), size, seed))
}

pub fn save_references(refs: &ReferenceFile, path: &Path) -> Result<(), RefsError> {
    let io_err = |source| RefsError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut text = serde_json::to_string_pretty(refs).expect("refs serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

pub fn load_references(path: &Path) -> Result<ReferenceFile, RefsError> {
    let text = fs::read_to_string(path).map_err(|source| RefsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |message: String| RefsError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let refs: ReferenceFile = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    if refs.schema != SCHEMA_NAME || refs.schema_version != SCHEMA_VERSION {
        return Err(schema(format!(
            "expected {SCHEMA_NAME} v{SCHEMA_VERSION}, found {} v{}",
            refs.schema, refs.schema_version
        )));
    }
    Ok(refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::generate;

    #[test]
    fn refs_round_trip_and_size_guard() {
        let ds = generate(Domain::TspC, Role::Design, 8, 3, 5).unwrap();
        let refs = compute_references(&ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = references_path(dir.path(), Domain::TspC, 8, 5);
        save_references(&refs, &path).unwrap();
        assert_eq!(load_references(&path).unwrap(), refs);
        assert_eq!(refs.optimum(ds.instances[1].id()), Some(refs.entries[1].optimum));

        let big = generate(Domain::TspC, Role::Design, 50, 1, 5).unwrap();
        assert!(compute_references(&big).is_err());
    }
}
