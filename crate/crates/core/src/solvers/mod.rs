//! Solver backbones: step-by-step construction driven by a selector program,
//! and ant colony optimization driven by a desirability program.

mod aco;
mod constructive;

pub use aco::{
    aco_defaults, aco_solve, aco_transition_probs, construct_cvrp_aco_step_mask, deposit_amount,
    AcoConfig, AcoRun, CvrpAntState,
};
pub use constructive::{construct_route, ConstructiveConfig};

use crate::domain::{Backbone, Domain};
use crate::instancegen::{DistanceMatrix, Instance, KnapsackInstance, OrienteeringInstance, RoutingInstance};
use crate::programhost::{invoke_matrix_heuristic, ExecFailure, ExecStatus, HeuristicProgram, Sandbox};
use serde::{Deserialize, Serialize};

/// Tolerance used when re-checking accumulated knapsack loads and route lengths.
const CHECK_EPS: f64 = 1e-9;

/// The structure of a solution, per problem family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Plan {
    /// Closed tour as a node sequence; the return to the first node is implicit.
    Tour(Vec<usize>),
    /// Vehicle routes as customer sequences; depot endpoints are implicit.
    Routes(Vec<Vec<usize>>),
    /// Orienteering path as visited customers; starts and ends at the depot.
    Path(Vec<usize>),
    /// Selected knapsack items.
    Items(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub domain: Domain,
    pub plan: Plan,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("instance `{id}` is not a {domain} instance")]
    WrongInstance { id: String, domain: Domain },
    #[error("desirability has {got} entries, expected {expected}")]
    EtaShape { got: usize, expected: usize },
    #[error("{0} has no ACO backbone")]
    NotAco(Domain),
}

impl From<SolveError> for ExecFailure {
    fn from(e: SolveError) -> Self {
        ExecFailure::new(ExecStatus::RuntimeError, e.to_string())
    }
}

pub fn tour_length(d: &DistanceMatrix, tour: &[usize]) -> f64 {
    if tour.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in tour.windows(2) {
        total += d.get(w[0], w[1]);
    }
    total + d.get(tour[tour.len() - 1], tour[0])
}

/// Total length of depot-anchored routes. With `open_last`, the final route's
/// return edge to the depot is not charged.
pub fn routes_cost(d: &DistanceMatrix, depot: usize, routes: &[Vec<usize>], open_last: bool) -> f64 {
    let mut total = 0.0;
    for (k, r) in routes.iter().enumerate() {
        let mut prev = depot;
        for &c in r {
            total += d.get(prev, c);
            prev = c;
        }
        if !(open_last && k + 1 == routes.len()) {
            total += d.get(prev, depot);
        }
    }
    total
}

/// Closed path length depot → path → depot.
pub fn path_length(d: &DistanceMatrix, depot: usize, path: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut prev = depot;
    for &c in path {
        total += d.get(prev, c);
        prev = c;
    }
    total + d.get(prev, depot)
}

fn check_tour(n: usize, tour: &[usize]) -> Result<(), String> {
    let mut seen = vec![false; n];
    for &v in tour {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(format!("node {v} is out of range or repeated"));
        }
    }
    if tour.len() != n {
        return Err(format!("tour visits {} of {n} nodes", tour.len()));
    }
    Ok(())
}

fn check_routes(r: &RoutingInstance, routes: &[Vec<usize>]) -> Result<(), String> {
    let n = r.base.n();
    let mut seen = vec![false; n];
    for route in routes {
        if route.is_empty() {
            return Err("empty route".into());
        }
        let mut load = 0u32;
        for &c in route {
            if c >= n || c == r.depot || std::mem::replace(&mut seen[c], true) {
                return Err(format!("customer {c} is invalid or repeated"));
            }
            load += r.demands[c];
        }
        if load > r.capacity {
            return Err(format!("route load {load} exceeds capacity {}", r.capacity));
        }
    }
    if let Some(c) = r.customers().find(|&c| !seen[c]) {
        return Err(format!("customer {c} is not served"));
    }
    Ok(())
}

fn check_path(o: &OrienteeringInstance, d: &DistanceMatrix, path: &[usize]) -> Result<(), String> {
    let n = o.base.n();
    let mut seen = vec![false; n];
    for &c in path {
        if c >= n || c == o.depot || std::mem::replace(&mut seen[c], true) {
            return Err(format!("node {c} is invalid or repeated"));
        }
    }
    let len = path_length(d, o.depot, path);
    if len > o.max_length + CHECK_EPS {
        return Err(format!("path length {len} exceeds budget {}", o.max_length));
    }
    Ok(())
}

fn check_items(k: &KnapsackInstance, items: &[usize]) -> Result<(), String> {
    let mut seen = vec![false; k.n()];
    let mut load = [0.0; crate::instancegen::MKP_DIMS];
    for &j in items {
        if j >= k.n() || std::mem::replace(&mut seen[j], true) {
            return Err(format!("item {j} is invalid or repeated"));
        }
        for (l, w) in load.iter_mut().zip(k.weights[j]) {
            *l += w;
        }
    }
    for (dim, (l, c)) in load.iter().zip(k.capacities).enumerate() {
        if *l > c + CHECK_EPS {
            return Err(format!("constraint {dim} load {l} exceeds capacity {c}"));
        }
    }
    Ok(())
}

/// Validates `plan` against the instance and recomputes its objective.
pub fn evaluate_plan(domain: Domain, instance: &Instance, plan: &Plan) -> Result<f64, String> {
    match (domain, instance, plan) {
        (Domain::TspC | Domain::TspAco, Instance::Euclidean(e), Plan::Tour(t)) => {
            check_tour(e.n(), t)?;
            Ok(tour_length(&e.distance_matrix(), t))
        }
        (Domain::CvrpC | Domain::OvrpC | Domain::CvrpAco, Instance::Routing(r), Plan::Routes(rs)) => {
            check_routes(r, rs)?;
            Ok(routes_cost(&r.base.distance_matrix(), r.depot, rs, domain == Domain::OvrpC))
        }
        (Domain::OpAco, Instance::Orienteering(o), Plan::Path(p)) => {
            let d = o.base.distance_matrix();
            check_path(o, &d, p)?;
            Ok(p.iter().map(|&c| o.prizes[c]).sum())
        }
        (Domain::MkpAco, Instance::Knapsack(k), Plan::Items(items)) => {
            check_items(k, items)?;
            Ok(items.iter().map(|&j| k.values[j]).sum())
        }
        _ => Err(format!("plan kind does not match domain {domain} and instance `{}`", instance.id())),
    }
}

/// Runs `program` on one instance with the domain's backbone.
pub fn solve(
    program: &HeuristicProgram,
    instance: &Instance,
    sandbox: &Sandbox,
    aco: &AcoConfig,
) -> Result<Solution, ExecFailure> {
    match program.domain().backbone() {
        Backbone::Constructive => construct_route(instance, program, &ConstructiveConfig::default(), sandbox),
        Backbone::Aco => {
            let eta = invoke_matrix_heuristic(sandbox, program, instance)?;
            Ok(aco_solve(program.domain(), instance, &eta, aco)?.best)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::EuclideanInstance;

    fn routing(coords: Vec<[f64; 2]>, demands: Vec<u32>, capacity: u32) -> RoutingInstance {
        RoutingInstance {
            base: EuclideanInstance {
                id: "r".into(),
                seed: 0,
                coords,
            },
            depot: 0,
            demands,
            capacity,
        }
    }

    #[test]
    fn open_routes_drop_only_the_final_return() {
        let r = routing(vec![[0.0, 0.0], [0.0, 0.5], [0.5, 0.0]], vec![0, 5, 5], 5);
        let d = r.base.distance_matrix();
        let routes = vec![vec![1], vec![2]];
        let closed = routes_cost(&d, 0, &routes, false);
        let open = routes_cost(&d, 0, &routes, true);
        assert_eq!(closed, 2.0);
        assert_eq!(closed - open, d.get(2, 0));
    }

    #[test]
    fn checks_catch_violations() {
        let r = routing(vec![[0.0, 0.0], [0.0, 0.5], [0.5, 0.0]], vec![0, 5, 5], 9);
        let inst = Instance::Routing(r);
        assert!(evaluate_plan(Domain::CvrpC, &inst, &Plan::Routes(vec![vec![1, 2]])).is_err());
        assert!(evaluate_plan(Domain::CvrpC, &inst, &Plan::Routes(vec![vec![1]])).is_err());
        assert!(evaluate_plan(Domain::CvrpC, &inst, &Plan::Routes(vec![vec![1], vec![2]])).is_ok());
        assert!(evaluate_plan(Domain::CvrpC, &inst, &Plan::Tour(vec![0, 1, 2])).is_err());
    }
}
