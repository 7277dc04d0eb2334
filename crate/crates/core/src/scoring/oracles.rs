//! Exact solvers for small instances, used as reference optima.

use crate::instancegen::{DistanceMatrix, KnapsackInstance, OrienteeringInstance, RoutingInstance, MKP_DIMS};

pub const TSP_ORACLE_MAX: usize = 13;
pub const MKP_ORACLE_MAX: usize = 20;
pub const ROUTING_ORACLE_MAX: usize = 8;
pub const OP_ORACLE_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{what} oracle handles at most {max}, got {n}")]
pub struct TooLarge {
    pub what: &'static str,
    pub n: usize,
    pub max: usize,
}

/// Held-Karp optimum tour length over all nodes of `d`.
pub fn exact_tsp(d: &DistanceMatrix) -> Result<f64, TooLarge> {
    let n = d.len();
    if n > TSP_ORACLE_MAX {
        return Err(TooLarge {
            what: "TSP (nodes)",
            n,
            max: TSP_ORACLE_MAX,
        });
    }
    if n <= 1 {
        return Ok(0.0);
    }
    // Subsets of nodes 1..n; node 0 is the fixed start.
    let m = n - 1;
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d.get(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + d.get(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                }
            }
        }
    }
    Ok((0..m)
        .map(|j| dp[(full - 1) * m + j] + d.get(j + 1, 0))
        .fold(f64::INFINITY, f64::min))
}

/// Optimum knapsack value by depth-first branch and bound.
pub fn exact_mkp(k: &KnapsackInstance) -> Result<f64, TooLarge> {
    let n = k.n();
    if n > MKP_ORACLE_MAX {
        return Err(TooLarge {
            what: "MKP (items)",
            n,
            max: MKP_ORACLE_MAX,
        });
    }
    // suffix[i] = value of items i.. (optimistic bound)
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + k.values[i];
    }
    fn dfs(
        k: &KnapsackInstance,
        suffix: &[f64],
        i: usize,
        load: [f64; MKP_DIMS],
        value: f64,
        best: &mut f64,
    ) {
        if value > *best {
            *best = value;
        }
        if i == k.n() || value + suffix[i] <= *best {
            return;
        }
        // loads are copied, not undone, so each subset's load is the plain
        // index-order sum with no add/subtract residue
        let mut next = load;
        for (l, w) in next.iter_mut().zip(&k.weights[i]) {
            *l += w;
        }
        if (0..MKP_DIMS).all(|m| next[m] <= k.capacities[m]) {
            dfs(k, suffix, i + 1, next, value + k.values[i], best);
        }
        dfs(k, suffix, i + 1, load, value, best);
    }
    let mut best = 0.0;
    dfs(k, &suffix, 0, [0.0; MKP_DIMS], 0.0, &mut best);
    Ok(best)
}

/// `paths[mask * m + j]`: shortest path that leaves the depot, visits exactly
/// the customers in `mask` and ends at customer `j`.
fn subset_paths(d: &DistanceMatrix, depot: usize, customers: &[usize]) -> Vec<f64> {
    let m = customers.len();
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d.get(depot, customers[j]);
    }
    for mask in 1..full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) == 0 {
                    let next = mask | (1 << k);
                    let cand = cur + d.get(customers[j], customers[k]);
                    if cand < dp[next * m + k] {
                        dp[next * m + k] = cand;
                    }
                }
            }
        }
    }
    dp
}

/// Optimum routing cost. With `open_last`, one route (the final vehicle's)
/// does not return to the depot; all others do.
pub fn exact_routing(r: &RoutingInstance, open_last: bool) -> Result<f64, TooLarge> {
    let customers: Vec<usize> = r.customers().collect();
    let m = customers.len();
    if m > ROUTING_ORACLE_MAX {
        return Err(TooLarge {
            what: "routing (customers)",
            n: m,
            max: ROUTING_ORACLE_MAX,
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    let d = r.base.distance_matrix();
    let full = 1usize << m;
    let paths = subset_paths(&d, r.depot, &customers);
    let mut closed = vec![f64::INFINITY; full];
    let mut open = vec![f64::INFINITY; full];
    for mask in 1..full {
        let load: u32 = (0..m).filter(|&j| mask & (1 << j) != 0).map(|j| r.demands[customers[j]]).sum();
        if load > r.capacity {
            continue;
        }
        for j in 0..m {
            if mask & (1 << j) != 0 {
                let p = paths[mask * m + j];
                open[mask] = open[mask].min(p);
                closed[mask] = closed[mask].min(p + d.get(customers[j], r.depot));
            }
        }
    }
    // all-closed partitions
    let mut part = vec![f64::INFINITY; full];
    part[0] = 0.0;
    for mask in 1..full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let s = sub | low;
            let c = closed[s] + part[mask ^ s];
            if c < part[mask] {
                part[mask] = c;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    if !open_last {
        return Ok(part[full - 1]);
    }
    let all = full - 1;
    let mut best = f64::INFINITY;
    let mut s = all;
    while s > 0 {
        best = best.min(open[s] + part[all ^ s]);
        s = (s - 1) & all;
    }
    Ok(best)
}

/// Optimum collected prize of an orienteering instance.
pub fn exact_op(o: &OrienteeringInstance) -> Result<f64, TooLarge> {
    let customers: Vec<usize> = (0..o.base.n()).filter(|&i| i != o.depot).collect();
    let m = customers.len();
    if m > OP_ORACLE_MAX {
        return Err(TooLarge {
            what: "OP (customers)",
            n: m,
            max: OP_ORACLE_MAX,
        });
    }
    let d = o.base.distance_matrix();
    let paths = subset_paths(&d, o.depot, &customers);
    let mut best = 0.0_f64;
    for mask in 1..(1usize << m) {
        let ok = (0..m).any(|j| {
            mask & (1 << j) != 0 && paths[mask * m + j] + d.get(customers[j], o.depot) <= o.max_length
        });
        if ok {
            let prize: f64 = (0..m).filter(|&j| mask & (1 << j) != 0).map(|j| o.prizes[customers[j]]).sum();
            best = best.max(prize);
        }
    }
    Ok(best)
}
