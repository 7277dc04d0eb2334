//! Committed baseline heuristics, one per domain.

use crate::domain::Domain;
use crate::programhost::{parse_program, HeuristicProgram};

const TSP_NEAREST: &str = r#"// Nearest neighbour: go to the closest unvisited node.
fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
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

const ROUTING_NEAREST: &str = r#"// Nearest feasible neighbour. The framework only offers customers that fit
// the remaining capacity and sends the vehicle home when none fit.
fn select_next_node(current_node, depot, feasible_unvisited, capacity_remaining, demands, distance_matrix) {
    let row = distance_matrix[current_node];
    let best = feasible_unvisited[0];
    for j in feasible_unvisited {
        if row[j] < row[best] {
            best = j;
        }
    }
    best
}
"#;

const TSP_INVERSE_DISTANCE: &str = r#"// eta = 1 / distance
fn heuristic(distance_matrix) {
    let n = distance_matrix.len();
    let eta = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            eta[i][j] = 1.0 / distance_matrix[i][j];
        }
    }
    eta
}
"#;

const CVRP_INVERSE_DISTANCE: &str = r#"// eta = 1 / distance
fn heuristic(distance_matrix, coordinates, demands, capacity) {
    let n = distance_matrix.len();
    let eta = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            eta[i][j] = 1.0 / distance_matrix[i][j];
        }
    }
    eta
}
"#;

const OP_PRIZE_OVER_DISTANCE: &str = r#"// eta[i][j] = prize[j] / distance[i][j]
fn heuristic(prize, distance, maxlen) {
    let n = prize.len();
    let eta = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            eta[i][j] = prize[j] / distance[i][j];
        }
    }
    eta
}
"#;

const MKP_VALUE_OVER_MEAN_WEIGHT: &str = r#"// eta[j] = prize[j] / mean weight of item j
fn heuristic(prize, weight) {
    let n = prize.len();
    let eta = zeros(n);
    for j in 0..n {
        eta[j] = prize[j] / mean(weight[j]);
    }
    eta
}
"#;

pub fn baseline_source(domain: Domain) -> &'static str {
    match domain {
        Domain::TspC => TSP_NEAREST,
        Domain::CvrpC | Domain::OvrpC => ROUTING_NEAREST,
        Domain::TspAco => TSP_INVERSE_DISTANCE,
        Domain::CvrpAco => CVRP_INVERSE_DISTANCE,
        Domain::OpAco => OP_PRIZE_OVER_DISTANCE,
        Domain::MkpAco => MKP_VALUE_OVER_MEAN_WEIGHT,
    }
}

pub fn baseline_program(domain: Domain) -> HeuristicProgram {
    parse_program(baseline_source(domain), domain).expect("committed baselines parse and bind")
}
