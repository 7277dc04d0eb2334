//! The fixed function interface a heuristic must implement for each domain.

use crate::domain::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    /// A single node index chosen by a constructive selector.
    NodeIndex,
    /// An (n, n) desirability matrix.
    Matrix,
    /// An (n,) desirability vector.
    Vector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionInterface {
    pub entry: &'static str,
    pub params: &'static [&'static str],
    pub returns: ReturnKind,
    /// Signature plus argument conventions, as shown to the designer.
    pub signature: &'static str,
}

impl FunctionInterface {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

static TSP_SELECTOR: FunctionInterface = FunctionInterface {
    entry: "select_next_node",
    params: &["current_node", "destination_node", "unvisited_nodes", "distance_matrix"],
    returns: ReturnKind::NodeIndex,
    signature: "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix)
    // current_node: int, destination_node: int (always node 0)
    // unvisited_nodes: array of int, distance_matrix: array of n arrays of n floats
    // returns: int, the next node to visit (must be one of unvisited_nodes)",
};

static ROUTING_SELECTOR: FunctionInterface = FunctionInterface {
    entry: "select_next_node",
    params: &[
        "current_node",
        "depot",
        "feasible_unvisited",
        "capacity_remaining",
        "demands",
        "distance_matrix",
    ],
    returns: ReturnKind::NodeIndex,
    signature: "fn select_next_node(current_node, depot, feasible_unvisited, capacity_remaining, demands, distance_matrix)
    // current_node: int, depot: int (always 0)
    // feasible_unvisited: array of int (customers whose demand fits the remaining capacity)
    // capacity_remaining: int, demands: array of int (demands[0] = 0)
    // distance_matrix: array of n arrays of n floats
    // returns: int, the next customer, or 0 (depot) to close the route and start a new one",
};

static TSP_ACO: FunctionInterface = FunctionInterface {
    entry: "heuristic",
    params: &["distance_matrix"],
    returns: ReturnKind::Matrix,
    signature: "fn heuristic(distance_matrix)
    // distance_matrix: array of n arrays of n floats
    // returns: array of n arrays of n non-negative floats (heuristic desirability)",
};

static CVRP_ACO: FunctionInterface = FunctionInterface {
    entry: "heuristic",
    params: &["distance_matrix", "coordinates", "demands", "capacity"],
    returns: ReturnKind::Matrix,
    signature: "fn heuristic(distance_matrix, coordinates, demands, capacity)
    // distance_matrix: array of n arrays of n floats (node 0 is the depot)
    // coordinates: array of n [x, y] float pairs
    // demands: array of n floats (demands[0] = 0.0), capacity: float
    // returns: array of n arrays of n non-negative floats (heuristic desirability)",
};

static OP_ACO: FunctionInterface = FunctionInterface {
    entry: "heuristic",
    params: &["prize", "distance", "maxlen"],
    returns: ReturnKind::Matrix,
    signature: "fn heuristic(prize, distance, maxlen)
    // prize: array of n floats (node 0 is the depot), distance: array of n arrays of n floats
    // maxlen: float, the route-length budget
    // returns: array of n arrays of n non-negative floats (heuristic desirability)",
};

static MKP_ACO: FunctionInterface = FunctionInterface {
    entry: "heuristic",
    params: &["prize", "weight"],
    returns: ReturnKind::Vector,
    signature: "fn heuristic(prize, weight)
    // prize: array of n floats, weight: array of n arrays of 5 floats (capacities are all 1)
    // returns: array of n non-negative floats (item desirability)",
};

/// The interface bound to `domain`. Every domain maps to exactly one interface.
pub fn interface_for(domain: Domain) -> &'static FunctionInterface {
    match domain {
        Domain::TspC => &TSP_SELECTOR,
        Domain::CvrpC | Domain::OvrpC => &ROUTING_SELECTOR,
        Domain::TspAco => &TSP_ACO,
        Domain::CvrpAco => &CVRP_ACO,
        Domain::OpAco => &OP_ACO,
        Domain::MkpAco => &MKP_ACO,
    }
}
