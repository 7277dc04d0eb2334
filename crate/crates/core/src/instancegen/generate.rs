use super::{
    euclidean, Dataset, EuclideanInstance, Instance, KnapsackInstance, OrienteeringInstance, Role,
    RoutingInstance, MKP_DIMS,
};
use crate::domain::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CVRP_CONSTRUCTIVE_CAPACITY: u32 = 40;
pub const CVRP_ACO_CAPACITY: u32 = 50;
/// Per-constraint capacity as a fraction of the raw weight sum, before rescaling to 1.
pub const MKP_TIGHTNESS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid size for {domain}: n = {n} ({reason})")]
    InvalidSize {
        domain: Domain,
        n: usize,
        reason: &'static str,
    },
    #[error("instance count must be at least 1")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvrpVariant {
    /// Random depot, Q = 40.
    Constructive,
    /// Depot fixed at (0.5, 0.5), Q = 50.
    Aco,
}

/// The RNG for instance `index` of the dataset keyed by `(seed, role)`.
///
/// Key bytes 0..8 hold the seed (little endian), bytes 8..16 the role code;
/// the ChaCha stream id is the instance index.
pub fn instance_rng(seed: u64, role: Role, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&role.key_code().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index as u64);
    rng
}

fn instance_id(domain: Domain, role: Role, n: usize, seed: u64, index: usize) -> String {
    format!("{}-{}-{}-{}-{:04}", domain.tag(), role.tag(), n, seed, index)
}

fn uniform_points(rng: &mut ChaCha8Rng, count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>();
            let y = rng.random::<f64>();
            [x, y]
        })
        .collect()
}

fn check_count(count: usize) -> Result<(), GenError> {
    if count == 0 {
        Err(GenError::EmptyDataset)
    } else {
        Ok(())
    }
}

/// Size and instance count `(n, count)` of the standard design split.
pub fn design_split(domain: Domain) -> (usize, usize) {
    match domain {
        Domain::TspC | Domain::CvrpC | Domain::OvrpC => (50, 64),
        Domain::TspAco => (50, 16),
        Domain::CvrpAco => (50, 10),
        Domain::OpAco => (50, 5),
        Domain::MkpAco => (100, 5),
    }
}

/// Dispatches to the generator that matches `domain`.
pub fn generate(
    domain: Domain,
    role: Role,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Dataset, GenError> {
    match domain {
        Domain::TspC | Domain::TspAco => generate_tsp(domain, role, n, count, seed),
        Domain::CvrpC => generate_cvrp(role, n, count, seed, CvrpVariant::Constructive),
        Domain::CvrpAco => generate_cvrp(role, n, count, seed, CvrpVariant::Aco),
        Domain::OvrpC => generate_ovrp(role, n, count, seed),
        Domain::OpAco => generate_op(role, n, count, seed),
        Domain::MkpAco => generate_mkp(role, n, count, seed),
    }
}

/// `n` cities uniform on the unit square.
pub fn generate_tsp(
    domain: Domain,
    role: Role,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Dataset, GenError> {
    if n < 3 {
        return Err(GenError::InvalidSize {
            domain,
            n,
            reason: "a tour needs at least 3 nodes",
        });
    }
    check_count(count)?;
    let instances = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, role, k);
            Instance::Euclidean(EuclideanInstance {
                id: instance_id(domain, role, n, seed, k),
                seed,
                coords: uniform_points(&mut rng, n),
            })
        })
        .collect();
    Ok(Dataset {
        domain,
        role,
        size: n,
        seed,
        instances,
    })
}

fn routing_instance(
    domain: Domain,
    role: Role,
    n: usize,
    seed: u64,
    k: usize,
    variant: CvrpVariant,
) -> RoutingInstance {
    let mut rng = instance_rng(seed, role, k);
    let (coords, capacity) = match variant {
        CvrpVariant::Constructive => (uniform_points(&mut rng, n + 1), CVRP_CONSTRUCTIVE_CAPACITY),
        CvrpVariant::Aco => {
            let mut coords = vec![[0.5, 0.5]];
            coords.extend(uniform_points(&mut rng, n));
            (coords, CVRP_ACO_CAPACITY)
        }
    };
    let mut demands = vec![0u32];
    demands.extend((0..n).map(|_| rng.random_range(1..=9u32)));
    RoutingInstance {
        base: EuclideanInstance {
            id: instance_id(domain, role, n, seed, k),
            seed,
            coords,
        },
        depot: 0,
        demands,
        capacity,
    }
}

/// `n` customers plus a depot at index 0; demands uniform on {1..9}.
pub fn generate_cvrp(
    role: Role,
    n: usize,
    count: usize,
    seed: u64,
    variant: CvrpVariant,
) -> Result<Dataset, GenError> {
    let domain = match variant {
        CvrpVariant::Constructive => Domain::CvrpC,
        CvrpVariant::Aco => Domain::CvrpAco,
    };
    generate_routing(domain, role, n, count, seed, variant)
}

/// Same distribution and stream layout as constructive CVRP; only the
/// objective convention differs downstream.
pub fn generate_ovrp(role: Role, n: usize, count: usize, seed: u64) -> Result<Dataset, GenError> {
    generate_routing(Domain::OvrpC, role, n, count, seed, CvrpVariant::Constructive)
}

fn generate_routing(
    domain: Domain,
    role: Role,
    n: usize,
    count: usize,
    seed: u64,
    variant: CvrpVariant,
) -> Result<Dataset, GenError> {
    if n < 2 {
        return Err(GenError::InvalidSize {
            domain,
            n,
            reason: "routing needs at least 2 customers",
        });
    }
    check_count(count)?;
    let instances = (0..count)
        .map(|k| Instance::Routing(routing_instance(domain, role, n, seed, k, variant)))
        .collect();
    Ok(Dataset {
        domain,
        role,
        size: n,
        seed,
        instances,
    })
}

/// Route-length budget by customer count.
pub fn op_max_length(n: usize) -> Option<f64> {
    match n {
        0..=50 => Some(3.0),
        51..=100 => Some(4.0),
        101..=200 => Some(5.0),
        201..=300 => Some(6.0),
        _ => None,
    }
}

/// Distance-derived prizes `(1 + ⌊99·d₀ᵢ / maxⱼ d₀ⱼ⌋) / 100` for every node.
pub fn op_prizes(coords: &[[f64; 2]], depot: usize) -> Vec<f64> {
    let d0: Vec<f64> = coords.iter().map(|&c| euclidean(coords[depot], c)).collect();
    let max = d0.iter().cloned().fold(0.0_f64, f64::max);
    d0.iter()
        .map(|&d| {
            let scaled = if max > 0.0 { 99.0 * d / max } else { 0.0 };
            (1.0 + scaled.floor()) / 100.0
        })
        .collect()
}

/// `n` customers plus a random depot at index 0.
pub fn generate_op(role: Role, n: usize, count: usize, seed: u64) -> Result<Dataset, GenError> {
    if n < 3 {
        return Err(GenError::InvalidSize {
            domain: Domain::OpAco,
            n,
            reason: "orienteering needs at least 3 customers",
        });
    }
    let max_length = op_max_length(n).ok_or(GenError::InvalidSize {
        domain: Domain::OpAco,
        n,
        reason: "the route-length schedule covers n <= 300",
    })?;
    check_count(count)?;
    let instances = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, role, k);
            let coords = uniform_points(&mut rng, n + 1);
            let prizes = op_prizes(&coords, 0);
            Instance::Orienteering(OrienteeringInstance {
                base: EuclideanInstance {
                    id: instance_id(Domain::OpAco, role, n, seed, k),
                    seed,
                    coords,
                },
                depot: 0,
                prizes,
                max_length,
            })
        })
        .collect();
    Ok(Dataset {
        domain: Domain::OpAco,
        role,
        size: n,
        seed,
        instances,
    })
}

/// Values and raw weights uniform on [0,1); capacity `i` is `λ·Σⱼ wᵢⱼ`
/// (raised to the largest single weight so every item fits alone), then
/// weights are divided by it so capacities become exactly 1.
pub fn generate_mkp(role: Role, n: usize, count: usize, seed: u64) -> Result<Dataset, GenError> {
    if n < 1 {
        return Err(GenError::InvalidSize {
            domain: Domain::MkpAco,
            n,
            reason: "at least one item is required",
        });
    }
    check_count(count)?;
    let instances = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, role, k);
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut weights: Vec<[f64; MKP_DIMS]> = (0..n)
                .map(|_| std::array::from_fn(|_| rng.random::<f64>()))
                .collect();
            for dim in 0..MKP_DIMS {
                let sum: f64 = weights.iter().map(|w| w[dim]).sum();
                let largest = weights.iter().map(|w| w[dim]).fold(0.0_f64, f64::max);
                let cap = (MKP_TIGHTNESS * sum).max(largest);
                if cap > 0.0 {
                    for w in weights.iter_mut() {
                        w[dim] /= cap;
                    }
                }
            }
            Instance::Knapsack(KnapsackInstance {
                id: instance_id(Domain::MkpAco, role, n, seed, k),
                seed,
                values,
                weights,
                capacities: [1.0; MKP_DIMS],
            })
        })
        .collect();
    Ok(Dataset {
        domain: Domain::MkpAco,
        role,
        size: n,
        seed,
        instances,
    })
}
