//! Seeded problem-instance generation, dataset files and design/validation splits.
//!
//! Every instance draws from its own ChaCha8 stream: the 256-bit key is built
//! from the dataset seed and the split role, and the stream id is the instance
//! index. Instance `k` can therefore be regenerated without touching `0..k`.

mod generate;
mod io;

pub use generate::{
    design_split, generate, generate_cvrp, generate_mkp, generate_op, generate_ovrp, generate_tsp,
    instance_rng, op_max_length, op_prizes, CvrpVariant, GenError, CVRP_ACO_CAPACITY,
    CVRP_CONSTRUCTIVE_CAPACITY, MKP_TIGHTNESS,
};
pub use io::{dataset_path, load_dataset, save_dataset, DatasetError, SCHEMA_VERSION};

use crate::domain::Domain;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Number of resource constraints in the knapsack domain.
pub const MKP_DIMS: usize = 5;

/// Dense, row-major, symmetric Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_coords(coords: &[[f64; 2]]) -> Self {
        let n = coords.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(coords[i], coords[j]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1))
    }
}

/// Plain `sqrt(dx² + dy²)`; `hypot` is avoided because libm implementations differ.
#[inline]
pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanInstance {
    pub id: String,
    pub seed: u64,
    pub coords: Vec<[f64; 2]>,
}

impl EuclideanInstance {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        DistanceMatrix::from_coords(&self.coords)
    }
}

/// Capacitated routing instance. Node 0 is the depot with demand 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingInstance {
    pub base: EuclideanInstance,
    pub depot: usize,
    pub demands: Vec<u32>,
    pub capacity: u32,
}

impl RoutingInstance {
    pub fn customers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.base.n()).filter(move |&i| i != self.depot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrienteeringInstance {
    pub base: EuclideanInstance,
    pub depot: usize,
    pub prizes: Vec<f64>,
    pub max_length: f64,
}

impl OrienteeringInstance {
    /// Sum of collectable prizes (the depot is excluded).
    pub fn total_prize(&self) -> f64 {
        self.prizes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.depot)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Knapsack instance with capacities normalized to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub id: String,
    pub seed: u64,
    pub values: Vec<f64>,
    /// One row per item, one column per constraint.
    pub weights: Vec<[f64; MKP_DIMS]>,
    pub capacities: [f64; MKP_DIMS],
}

impl KnapsackInstance {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn total_value(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instance {
    Euclidean(EuclideanInstance),
    Routing(RoutingInstance),
    Orienteering(OrienteeringInstance),
    Knapsack(KnapsackInstance),
}

impl Instance {
    pub fn id(&self) -> &str {
        match self {
            Instance::Euclidean(e) => &e.id,
            Instance::Routing(r) => &r.base.id,
            Instance::Orienteering(o) => &o.base.id,
            Instance::Knapsack(k) => &k.id,
        }
    }

    /// Node coordinates, when the instance is spatial.
    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        match self {
            Instance::Euclidean(e) => Some(&e.coords),
            Instance::Routing(r) => Some(&r.base.coords),
            Instance::Orienteering(o) => Some(&o.base.coords),
            Instance::Knapsack(_) => None,
        }
    }

    /// Node (or item) count.
    pub fn n(&self) -> usize {
        match self {
            Instance::Knapsack(k) => k.n(),
            other => other.coords().map_or(0, |c| c.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Design,
    Validation,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Design => "design",
            Role::Validation => "validation",
        }
    }

    pub(crate) fn key_code(self) -> u64 {
        match self {
            Role::Design => 0,
            Role::Validation => 1,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "design" => Ok(Role::Design),
            "validation" => Ok(Role::Validation),
            other => Err(format!("unknown role `{other}` (expected design or validation)")),
        }
    }
}

/// An ordered, immutable collection of instances of one domain and size class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub domain: Domain,
    pub role: Role,
    /// Size class N (nodes for TSP, customers for routing/OP, items for MKP).
    pub size: usize,
    pub seed: u64,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id() == id)
    }

    /// SHA-256 of the canonical file serialization.
    pub fn checksum(&self) -> String {
        io::checksum_of(self)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("dataset role is `{0}`, but only design-role datasets may be bound here")]
pub struct NotADesignSet(pub Role);

/// A dataset statically known to be a design split. Sessions and diagnostic
/// tools accept only this type, so validation instances cannot reach them.
#[derive(Debug, Clone)]
pub struct DesignSet(Arc<Dataset>);

impl DesignSet {
    pub fn new(dataset: Dataset) -> Result<Self, NotADesignSet> {
        match dataset.role {
            Role::Design => Ok(Self(Arc::new(dataset))),
            other => Err(NotADesignSet(other)),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.0
    }
}

impl std::ops::Deref for DesignSet {
    type Target = Dataset;

    fn deref(&self) -> &Dataset {
        &self.0
    }
}

impl TryFrom<Dataset> for DesignSet {
    type Error = NotADesignSet;

    fn try_from(dataset: Dataset) -> Result<Self, Self::Error> {
        DesignSet::new(dataset)
    }
}
