//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use ahd_core::instancegen::{
    generate, Dataset, DesignSet, DistanceMatrix, Instance, KnapsackInstance, Role,
};
use ahd_core::Domain;

/// Shortest closed tour by visiting every permutation with node 0 fixed.
/// Lengths are summed along the path from node 0, closing edge last.
pub fn brute_tsp(d: &DistanceMatrix) -> f64 {
    fn walk(d: &DistanceMatrix, last: usize, used: &mut [bool], len: f64, depth: usize, best: &mut f64) {
        let n = used.len();
        if depth == n {
            let total = len + d.get(last, 0);
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 1..n {
            if !used[j] {
                used[j] = true;
                walk(d, j, used, len + d.get(last, j), depth + 1, best);
                used[j] = false;
            }
        }
    }
    let n = d.len();
    if n <= 1 {
        return 0.0;
    }
    let mut used = vec![false; n];
    used[0] = true;
    let mut best = f64::INFINITY;
    walk(d, 0, &mut used, 0.0, 1, &mut best);
    best
}

/// Best knapsack value over all 2^n item subsets, loads summed in index order.
pub fn brute_mkp(k: &KnapsackInstance) -> f64 {
    let n = k.n();
    let dims = k.capacities.len();
    let mut best = 0.0_f64;
    for mask in 0u64..(1u64 << n) {
        let mut load = vec![0.0; dims];
        let mut value = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                for (m, l) in load.iter_mut().enumerate() {
                    *l += k.weights[i][m];
                }
                value += k.values[i];
            }
        }
        if (0..dims).all(|m| load[m] <= k.capacities[m]) && value > best {
            best = value;
        }
    }
    best
}

/// Moran's I with binary k-nearest-neighbour weights, neighbours found by
/// sorting all distances (ties broken by index).
pub fn reference_morans_i(coords: &[[f64; 2]], values: &[f64], k: usize) -> f64 {
    let n = coords.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let mut cross = 0.0;
    let mut w = 0.0;
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                (dx.hypot(dy), j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            cross += z[i] * z[j];
            w += 1.0;
        }
    }
    let denom: f64 = z.iter().map(|v| v * v).sum();
    n as f64 / w * cross / denom
}

pub fn dataset(domain: Domain, n: usize, count: usize, seed: u64) -> Dataset {
    generate(domain, Role::Design, n, count, seed).expect("generate")
}

pub fn design(domain: Domain, n: usize, count: usize, seed: u64) -> DesignSet {
    DesignSet::new(dataset(domain, n, count, seed)).expect("design role")
}

pub fn coords(inst: &Instance) -> &[[f64; 2]] {
    inst.coords().expect("spatial instance")
}

pub fn distances(inst: &Instance) -> DistanceMatrix {
    DistanceMatrix::from_coords(coords(inst))
}

pub fn knapsack(inst: &Instance) -> &KnapsackInstance {
    match inst {
        Instance::Knapsack(k) => k,
        _ => panic!("not a knapsack instance"),
    }
}

/// Repository root, two levels above this crate.
pub fn repo_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    repo_root().join("fixtures").join(name)
}

/// Picks unvisited nodes in index order.
pub const INDEX_ORDER: &str = r#"fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    unvisited_nodes[0]
}
"#;

pub const NEAREST: &str = r#"fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    let row = distance_matrix[current_node];
    let best = unvisited_nodes[0];
    for j in unvisited_nodes {
        if row[j] < row[best] {
            best = j;
        }
    }
    best
}
"#;

/// `NEAREST` with every identifier renamed.
pub const RENAMED_NEAREST: &str = r#"fn select_next_node(here, goal, open_set, dist) {
    let costs = dist[here];
    let pick = open_set[0];
    for candidate in open_set {
        if costs[candidate] < costs[pick] {
            pick = candidate;
        }
    }
    pick
}
"#;

/// Indexes far past the end of a row.
pub const OUT_OF_RANGE: &str = r#"fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    distance_matrix[current_node][unvisited_nodes.len() * 1000]
}
"#;

/// Four collinear cities at x = 0, 0.6, 0.3, 0.45. Visiting them in index
/// order costs 1.5; nearest neighbour from city 0 costs 1.2.
pub fn collinear_design() -> DesignSet {
    let coords = [0.0, 0.6, 0.3, 0.45].map(|x| [x, 0.0]).to_vec();
    let ds = Dataset {
        domain: Domain::TspC,
        role: Role::Design,
        size: 4,
        seed: 0,
        instances: vec![Instance::Euclidean(ahd_core::instancegen::EuclideanInstance {
            id: "collinear".into(),
            seed: 0,
            coords,
        })],
    };
    DesignSet::new(ds).unwrap()
}

pub fn script(turns: &[String]) -> ahd_core::agent::ScriptedPolicy {
    ahd_core::agent::ScriptedPolicy::new(turns.to_vec())
}

pub fn eval_turn(source: &str) -> String {
    format!("Trying this.\n```rhai\n{source}```")
}

pub fn final_turn(source: &str) -> String {
    format!("Done.\n{}\n```rhai\n{source}```", ahd_core::agent::FINAL_MARKER)
}

/// Runs the committed single-episode demo in `workspace` and returns the
/// session directory.
pub fn run_tsp_demo(workspace: &std::path::Path) -> std::path::PathBuf {
    use ahd_core::agent::{run_episode, EpisodeOptions, ScriptedPolicy};
    use ahd_core::session::{Session, SessionConfig};
    let policy = ScriptedPolicy::load(&fixture("tsp_demo"), None).unwrap();
    let mut session =
        Session::create(workspace, SessionConfig::new(Domain::TspC, 30), design(Domain::TspC, 20, 8, 1)).unwrap();
    let t = run_episode(&policy, &mut session, &EpisodeOptions::default()).unwrap();
    session.close(t.final_source.as_deref()).unwrap();
    session.dir().to_path_buf()
}

pub fn sha256_file(path: &std::path::Path) -> String {
    ahd_core::session::sha256_hex(&std::fs::read_to_string(path).unwrap())
}

/// Regular `side` x `side` lattice in the unit square.
pub fn grid(side: usize) -> Vec<[f64; 2]> {
    (0..side * side)
        .map(|k| [(k % side) as f64 / side as f64, (k / side) as f64 / side as f64])
        .collect()
}

/// Random layout with demand 9 on the left half and 1 on the right.
pub fn two_block_fixture() -> (Vec<[f64; 2]>, Vec<f64>) {
    let ds = dataset(Domain::TspC, 60, 1, 17);
    let pts = coords(&ds.instances[0]).to_vec();
    let demands = pts.iter().map(|p| if p[0] < 0.5 { 9.0 } else { 1.0 }).collect();
    (pts, demands)
}
