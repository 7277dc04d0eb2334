//! Step-by-step construction. The program picks the next node at each step;
//! the framework decides which nodes it may pick and closes routes when
//! nothing fits.

use super::{routes_cost, tour_length, Plan, Solution, SolveError};
use crate::domain::Domain;
use crate::instancegen::Instance;
use crate::programhost::{
    int_array, invoke_selector, matrix_value, ExecFailure, ExecStatus, HeuristicProgram, Sandbox,
    SelectorContext,
};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConstructiveConfig {
    /// First node of a TSP tour. The selector's destination is always node 0.
    pub start_node: usize,
}

/// Aggregate time budget for the selector calls of one construction.
struct Budget {
    start: Instant,
    total: Duration,
    per_call: Duration,
}

impl Budget {
    fn next_call(&self) -> Result<Duration, ExecFailure> {
        let left = self.total.saturating_sub(self.start.elapsed());
        if left.is_zero() {
            return Err(ExecFailure::new(
                ExecStatus::Timeout,
                format!("construction exceeded the {} ms aggregate limit", self.total.as_millis()),
            ));
        }
        Ok(left.min(self.per_call))
    }
}

pub fn construct_route(
    instance: &Instance,
    program: &HeuristicProgram,
    config: &ConstructiveConfig,
    sandbox: &Sandbox,
) -> Result<Solution, ExecFailure> {
    let domain = program.domain();
    let budget = Budget {
        start: Instant::now(),
        total: sandbox.limits().construction,
        per_call: sandbox.limits().selector_call,
    };
    match (domain, instance) {
        (Domain::TspC, Instance::Euclidean(e)) => {
            let n = e.n();
            if config.start_node >= n {
                return Err(ExecFailure::new(
                    ExecStatus::RuntimeError,
                    format!("start node {} out of range for {n} nodes", config.start_node),
                ));
            }
            let d = e.distance_matrix();
            let dv = matrix_value(&d);
            let mut unvisited: Vec<usize> = (0..n).filter(|&i| i != config.start_node).collect();
            let mut tour = vec![config.start_node];
            while !unvisited.is_empty() {
                let ctx = SelectorContext {
                    current: *tour.last().unwrap(),
                    anchor: 0,
                    candidates: &unvisited,
                    capacity_remaining: None,
                    demands: None,
                    distance_matrix: &dv,
                    anchor_allowed: false,
                };
                let next = invoke_selector(sandbox, program, &ctx, budget.next_call()?)?;
                unvisited.retain(|&v| v != next);
                tour.push(next);
            }
            let objective = tour_length(&d, &tour);
            Ok(Solution {
                domain,
                plan: Plan::Tour(tour),
                objective,
                feasible: true,
            })
        }
        (Domain::CvrpC | Domain::OvrpC, Instance::Routing(r)) => {
            let d = r.base.distance_matrix();
            let dv = matrix_value(&d);
            let demands = int_array(r.demands.iter().map(|&x| x as usize));
            let depot = r.depot;
            let mut unserved: Vec<usize> = r.customers().collect();
            let mut routes: Vec<Vec<usize>> = Vec::new();
            let mut route: Vec<usize> = Vec::new();
            let mut remaining = r.capacity;
            while !unserved.is_empty() {
                let feasible: Vec<usize> = unserved
                    .iter()
                    .copied()
                    .filter(|&c| r.demands[c] <= remaining)
                    .collect();
                let current = route.last().copied().unwrap_or(depot);
                if feasible.is_empty() {
                    // nothing fits: the framework sends the vehicle home
                    routes.push(std::mem::take(&mut route));
                    remaining = r.capacity;
                    continue;
                }
                let ctx = SelectorContext {
                    current,
                    anchor: depot,
                    candidates: &feasible,
                    capacity_remaining: Some(remaining),
                    demands: Some(&demands),
                    distance_matrix: &dv,
                    anchor_allowed: current != depot,
                };
                let next = invoke_selector(sandbox, program, &ctx, budget.next_call()?)?;
                if next == depot {
                    routes.push(std::mem::take(&mut route));
                    remaining = r.capacity;
                } else {
                    unserved.retain(|&c| c != next);
                    remaining -= r.demands[next];
                    route.push(next);
                }
            }
            if !route.is_empty() {
                routes.push(route);
            }
            let objective = routes_cost(&d, depot, &routes, domain == Domain::OvrpC);
            Ok(Solution {
                domain,
                plan: Plan::Routes(routes),
                objective,
                feasible: true,
            })
        }
        _ => Err(SolveError::WrongInstance {
            id: instance.id().to_string(),
            domain,
        }
        .into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate_cvrp, CvrpVariant, EuclideanInstance, Role};
    use crate::programhost::{parse_program, Limits};
    use crate::solvers::evaluate_plan;

    const NN: &str = "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    let best = unvisited_nodes[0];
    for j in unvisited_nodes {
        if distance_matrix[current_node][j] < distance_matrix[current_node][best] { best = j; }
    }
    best
}";

    const NEAREST_FEASIBLE: &str = "fn select_next_node(current_node, depot, feasible_unvisited, capacity_remaining, demands, distance_matrix) {
    let best = feasible_unvisited[0];
    for j in feasible_unvisited {
        if distance_matrix[current_node][j] < distance_matrix[current_node][best] { best = j; }
    }
    best
}";

    #[test]
    fn nearest_neighbour_on_square_corners() {
        let inst = Instance::Euclidean(EuclideanInstance {
            id: "sq".into(),
            seed: 0,
            coords: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        });
        let p = parse_program(NN, Domain::TspC).unwrap();
        let s = construct_route(&inst, &p, &ConstructiveConfig::default(), &Sandbox::new(Limits::default())).unwrap();
        assert_eq!(s.objective, 4.0);
        assert_eq!(evaluate_plan(Domain::TspC, &inst, &s.plan).unwrap(), 4.0);
    }

    #[test]
    fn heavy_demands_cap_route_size() {
        let mut ds = generate_cvrp(Role::Design, 20, 2, 3, CvrpVariant::Constructive).unwrap();
        for inst in ds.instances.iter_mut() {
            if let Instance::Routing(r) = inst {
                for c in 1..r.demands.len() {
                    r.demands[c] = 9;
                }
            }
        }
        let p = parse_program(NEAREST_FEASIBLE, Domain::CvrpC).unwrap();
        let sb = Sandbox::new(Limits::default());
        for inst in &ds.instances {
            let s = construct_route(inst, &p, &ConstructiveConfig::default(), &sb).unwrap();
            let Plan::Routes(routes) = &s.plan else { panic!() };
            assert!(routes.iter().all(|r| r.len() <= 4));
            assert_eq!(evaluate_plan(Domain::CvrpC, inst, &s.plan).unwrap(), s.objective);
        }
    }

    #[test]
    fn open_variant_saves_exactly_the_last_return() {
        let ds = generate_cvrp(Role::Design, 15, 3, 11, CvrpVariant::Constructive).unwrap();
        let sb = Sandbox::new(Limits::default());
        let closed = parse_program(NEAREST_FEASIBLE, Domain::CvrpC).unwrap();
        let open = parse_program(NEAREST_FEASIBLE, Domain::OvrpC).unwrap();
        for inst in &ds.instances {
            let a = construct_route(inst, &closed, &ConstructiveConfig::default(), &sb).unwrap();
            let b = construct_route(inst, &open, &ConstructiveConfig::default(), &sb).unwrap();
            assert_eq!(a.plan, b.plan);
            let Plan::Routes(routes) = &a.plan else { panic!() };
            let Instance::Routing(r) = inst else { panic!() };
            let last = *routes.last().unwrap().last().unwrap();
            let d = r.base.distance_matrix();
            assert!((a.objective - b.objective - d.get(last, r.depot)).abs() < 1e-12);
        }
    }

    #[test]
    fn returning_depot_closes_route() {
        // close after every customer: one customer per route
        let src = "fn select_next_node(c, depot, f, cap, dem, d) { if c == depot { f[0] } else { depot } }";
        let ds = generate_cvrp(Role::Design, 6, 1, 2, CvrpVariant::Constructive).unwrap();
        let p = parse_program(src, Domain::CvrpC).unwrap();
        let s = construct_route(&ds.instances[0], &p, &ConstructiveConfig::default(), &Sandbox::new(Limits::default())).unwrap();
        let Plan::Routes(routes) = &s.plan else { panic!() };
        assert_eq!(routes.len(), 6);

        // depot while already at the depot is a contract violation
        let stuck = "fn select_next_node(c, depot, f, cap, dem, d) { depot }";
        let p = parse_program(stuck, Domain::CvrpC).unwrap();
        let err = construct_route(&ds.instances[0], &p, &ConstructiveConfig::default(), &Sandbox::new(Limits::default())).unwrap_err();
        assert_eq!(err.status, ExecStatus::InfeasibleOutput);
    }

    #[test]
    fn aggregate_limit_applies() {
        let slow = "fn select_next_node(a, b, u, d) { let s = 0; for i in 0..2000 { s += i; } u[0] }";
        let p = parse_program(slow, Domain::TspC).unwrap();
        let limits = Limits {
            construction: Duration::from_millis(1),
            ..Limits::default()
        };
        let ds = crate::instancegen::generate_tsp(Domain::TspC, Role::Design, 200, 1, 1).unwrap();
        let err = construct_route(&ds.instances[0], &p, &ConstructiveConfig::default(), &Sandbox::new(limits)).unwrap_err();
        assert_eq!(err.status, ExecStatus::Timeout);
    }
}
