//! Candidate heuristic programs: parsing, interface binding and sandboxed execution.
//!
//! Programs are Rhai scripts. A program is bound to one domain and must
//! define that domain's entry function with the interface's arity. Matrices
//! are passed as arrays of float arrays; node indices and integer demands
//! are passed as ints.

mod interface;
mod sandbox;
mod syntax;
mod values;

pub use interface::{interface_for, FunctionInterface, ReturnKind};
pub use sandbox::{Limits, Sandbox};
pub use syntax::{NodeCategory, SyntaxNode, SyntaxTree, TreeSummary};
pub use values::{
    coords_value, float_array, heuristic_args, int_array, matrix_value, read_matrix, read_vector,
    sanitize, ETA_FLOOR,
};

use crate::domain::{Backbone, Domain};
use crate::instancegen::Instance;
use rhai::{Dynamic, AST, INT};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    ParseError,
    RuntimeError,
    Timeout,
    InfeasibleOutput,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Ok => "ok",
            ExecStatus::ParseError => "parse_error",
            ExecStatus::RuntimeError => "runtime_error",
            ExecStatus::Timeout => "timeout",
            ExecStatus::InfeasibleOutput => "infeasible_output",
        }
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failed execution: never `ExecStatus::Ok`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{status}: {message}")]
pub struct ExecFailure {
    pub status: ExecStatus,
    pub message: String,
}

impl ExecFailure {
    pub fn new(status: ExecStatus, message: impl Into<String>) -> Self {
        debug_assert_ne!(status, ExecStatus::Ok);
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self::new(ExecStatus::InfeasibleOutput, message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("empty program source")]
    Empty,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
}

impl From<ProgramError> for ExecFailure {
    fn from(e: ProgramError) -> Self {
        ExecFailure::new(ExecStatus::ParseError, e.to_string())
    }
}

/// A parsed program bound to a domain interface.
#[derive(Clone)]
pub struct HeuristicProgram {
    source: String,
    domain: Domain,
    ast: AST,
    tree: SyntaxTree,
}

impl fmt::Debug for HeuristicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeuristicProgram")
            .field("domain", &self.domain)
            .field("entry", &self.entry_name())
            .field("source_len", &self.source.len())
            .finish()
    }
}

impl HeuristicProgram {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn interface(&self) -> &'static FunctionInterface {
        interface_for(self.domain)
    }

    pub fn entry_name(&self) -> &'static str {
        self.interface().entry
    }

    pub fn tree(&self) -> &SyntaxTree {
        &self.tree
    }

    pub(crate) fn ast(&self) -> &AST {
        &self.ast
    }
}

/// Compiles `source` into a syntax tree without binding it to an interface.
pub fn parse_tree(source: &str) -> Result<SyntaxTree, ProgramError> {
    if source.trim().is_empty() {
        return Err(ProgramError::Empty);
    }
    let ast = sandbox::parse_engine()
        .compile(source)
        .map_err(|e| ProgramError::Parse(e.to_string()))?;
    Ok(SyntaxTree::from_ast(&ast))
}

/// Parses `source` and checks it defines the domain's entry function with
/// the right number of parameters. Parameter names are not enforced.
pub fn parse_program(source: &str, domain: Domain) -> Result<HeuristicProgram, ProgramError> {
    if source.trim().is_empty() {
        return Err(ProgramError::Empty);
    }
    let ast = sandbox::parse_engine()
        .compile(source)
        .map_err(|e| ProgramError::Parse(e.to_string()))?;
    let iface = interface_for(domain);
    let defs: Vec<(String, usize)> = ast
        .iter_functions()
        .map(|f| (f.name.to_string(), f.params.len()))
        .collect();
    let named: Vec<usize> = defs
        .iter()
        .filter(|(n, _)| n == iface.entry)
        .map(|(_, a)| *a)
        .collect();
    if named.is_empty() {
        let found: Vec<String> = defs.iter().map(|(n, a)| format!("{n}/{a}")).collect();
        return Err(ProgramError::InterfaceMismatch(format!(
            "no function `{}` defined (found: [{}]); expected {}/{}",
            iface.entry,
            found.join(", "),
            iface.entry,
            iface.arity()
        )));
    }
    if !named.contains(&iface.arity()) {
        return Err(ProgramError::InterfaceMismatch(format!(
            "`{}` takes {} parameter(s), expected {} ({})",
            iface.entry,
            named[0],
            iface.arity(),
            iface.params.join(", ")
        )));
    }
    let tree = SyntaxTree::from_ast(&ast);
    Ok(HeuristicProgram {
        source: source.to_string(),
        domain,
        ast,
        tree,
    })
}

/// Result record of a single sandboxed call.
#[derive(Debug, Clone)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub value: Option<Dynamic>,
    pub wall_time: f64,
    pub diagnostics: String,
}

/// Runs the entry function once with `args` under the matrix-call limit.
pub fn sandbox_execute(program: &HeuristicProgram, args: Vec<Dynamic>, limits: &Limits) -> ExecutionOutcome {
    let sandbox = Sandbox::new(limits.clone());
    let start = Instant::now();
    let result = sandbox.call(program, args, limits.matrix_call);
    let wall_time = start.elapsed().as_secs_f64();
    match result {
        Ok(v) => ExecutionOutcome {
            status: ExecStatus::Ok,
            value: Some(v),
            wall_time,
            diagnostics: String::new(),
        },
        Err(f) => ExecutionOutcome {
            status: f.status,
            value: None,
            wall_time,
            diagnostics: f.message,
        },
    }
}

/// Arguments of one constructive selector call.
#[derive(Debug, Clone, Copy)]
pub struct SelectorContext<'a> {
    pub current: usize,
    /// Destination node for TSP, depot for routing.
    pub anchor: usize,
    /// Unvisited nodes (TSP) or capacity-feasible customers (routing).
    pub candidates: &'a [usize],
    /// Routing only.
    pub capacity_remaining: Option<u32>,
    /// Routing only: cached int array of demands.
    pub demands: Option<&'a Dynamic>,
    /// Cached distance matrix value.
    pub distance_matrix: &'a Dynamic,
    /// Whether returning the anchor (closing the route) is allowed.
    pub anchor_allowed: bool,
}

/// Calls a constructive selector and validates the returned index.
pub fn invoke_selector(
    sandbox: &Sandbox,
    program: &HeuristicProgram,
    ctx: &SelectorContext<'_>,
    timeout: Duration,
) -> Result<usize, ExecFailure> {
    debug_assert_eq!(program.domain.backbone(), Backbone::Constructive);
    let mut args = vec![
        Dynamic::from_int(ctx.current as INT),
        Dynamic::from_int(ctx.anchor as INT),
        int_array(ctx.candidates.iter().copied()),
    ];
    if program.domain != Domain::TspC {
        args.push(Dynamic::from_int(ctx.capacity_remaining.unwrap_or(0) as INT));
        args.push(ctx.demands.cloned().unwrap_or_else(|| Dynamic::from_array(Vec::new())));
    }
    args.push(ctx.distance_matrix.clone());
    let v = sandbox.call(program, args, timeout)?;
    let idx = v.as_int().map_err(|t| {
        ExecFailure::infeasible(format!("selector returned {t}, expected an int node index"))
    })?;
    let ok = idx >= 0
        && (ctx.candidates.contains(&(idx as usize)) || (ctx.anchor_allowed && idx as usize == ctx.anchor));
    if !ok {
        return Err(ExecFailure::infeasible(format!(
            "selector returned node {idx}, which is not in the allowed set"
        )));
    }
    Ok(idx as usize)
}

/// Sanitized desirability values: row-major (n, n), or (n,) for knapsack.
#[derive(Debug, Clone, PartialEq)]
pub struct Desirability {
    pub n: usize,
    pub values: Vec<f64>,
    /// Entries replaced by the floor during sanitation.
    pub clamped: usize,
}

impl Desirability {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Calls a desirability heuristic on an instance, checks the shape and sanitizes.
pub fn invoke_matrix_heuristic(
    sandbox: &Sandbox,
    program: &HeuristicProgram,
    instance: &Instance,
) -> Result<Desirability, ExecFailure> {
    let domain = program.domain;
    let args = heuristic_args(domain, instance).ok_or_else(|| {
        ExecFailure::new(
            ExecStatus::RuntimeError,
            format!("instance `{}` does not belong to domain {domain}", instance.id()),
        )
    })?;
    let n = instance.n();
    let v = sandbox.call(program, args, sandbox.limits().matrix_call)?;
    let mut values = match interface_for(domain).returns {
        ReturnKind::Vector => read_vector(&v, n),
        _ => read_matrix(&v, n),
    }
    .map_err(ExecFailure::infeasible)?;
    let clamped = sanitize(&mut values).map_err(ExecFailure::infeasible)?;
    Ok(Desirability { n, values, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate, DistanceMatrix, EuclideanInstance, Role};

    const NN: &str = "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    let best = unvisited_nodes[0];
    for j in unvisited_nodes {
        if distance_matrix[current_node][j] < distance_matrix[current_node][best] { best = j; }
    }
    best
}";

    fn square() -> Instance {
        Instance::Euclidean(EuclideanInstance {
            id: "sq".into(),
            seed: 0,
            coords: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        })
    }

    #[test]
    fn float_comparisons_are_exact() {
        let src = "fn heuristic(d) { let a = inf(); [2.0 < a, -a < 0.0, 1 < a, a == a, 1.0 < 1.0 + 2.3e-16, 0.1 + 0.2 == 0.3] }";
        let p = parse_program(src, Domain::TspAco).unwrap();
        let out = Sandbox::new(Limits::default())
            .call(&p, vec![Dynamic::from_float(1.0)], std::time::Duration::from_secs(5))
            .unwrap();
        let got: Vec<bool> = out.into_array().unwrap().into_iter().map(|v| v.as_bool().unwrap()).collect();
        assert_eq!(got, [true, true, true, true, true, false]);
    }

    #[test]
    fn nested_loops_parse() {
        let src = "fn select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix) {
    let best = unvisited_nodes[0];
    let best_score = inf();
    for j in unvisited_nodes {
        let nearest = 0.0;
        let found = false;
        for k in unvisited_nodes {
            if k != j && (!found || distance_matrix[j][k] < nearest) {
                if true { if true { nearest = distance_matrix[j][k]; found = true; } }
            }
        }
        let s = distance_matrix[current_node][j] + 0.3 * nearest;
        if s < best_score { best_score = s; best = j; }
    }
    best
}";
        assert!(parse_program(src, Domain::TspC).is_ok());
    }

    #[test]
    fn binding_checks_name_and_arity() {
        assert!(parse_program(NN, Domain::TspC).is_ok());
        let typo = NN.replace("select_next_node", "select_nxt_node");
        assert!(matches!(parse_program(&typo, Domain::TspC), Err(ProgramError::InterfaceMismatch(_))));
        assert!(matches!(parse_program(NN, Domain::CvrpC), Err(ProgramError::InterfaceMismatch(_))));
        assert!(matches!(parse_program("fn select_next_node(a, b {", Domain::TspC), Err(ProgramError::Parse(_))));
        assert_eq!(parse_program("  \n", Domain::TspC).unwrap_err(), ProgramError::Empty);
    }

    #[test]
    fn selector_returns_nearest_and_rejects_outside_set() {
        let p = parse_program(NN, Domain::TspC).unwrap();
        let coords = [[0.0, 0.0], [0.5, 0.0], [0.2, 0.0], [0.9, 0.0]];
        let dm = matrix_value(&DistanceMatrix::from_coords(&coords));
        let sb = Sandbox::new(Limits::default());
        let ctx = SelectorContext {
            current: 0,
            anchor: 0,
            candidates: &[1, 2, 3],
            capacity_remaining: None,
            demands: None,
            distance_matrix: &dm,
            anchor_allowed: false,
        };
        assert_eq!(invoke_selector(&sb, &p, &ctx, Duration::from_secs(1)).unwrap(), 2);

        let rogue = parse_program(
            "fn select_next_node(c, d, u, m) { 99 }",
            Domain::TspC,
        )
        .unwrap();
        let err = invoke_selector(&sb, &rogue, &ctx, Duration::from_secs(1)).unwrap_err();
        assert_eq!(err.status, ExecStatus::InfeasibleOutput);

        let boom = parse_program("fn select_next_node(c, d, u, m) { u[100] }", Domain::TspC).unwrap();
        let err = invoke_selector(&sb, &boom, &ctx, Duration::from_secs(1)).unwrap_err();
        assert_eq!(err.status, ExecStatus::RuntimeError);
    }

    #[test]
    fn inverse_distance_matrix_is_reciprocal_off_diagonal() {
        let p = parse_program(
            "fn heuristic(distance_matrix) {
                let n = distance_matrix.len();
                let eta = zeros(n, n);
                for i in 0..n { for j in 0..n { eta[i][j] = 1.0 / distance_matrix[i][j]; } }
                eta
            }",
            Domain::TspAco,
        )
        .unwrap();
        let inst = square();
        let eta = invoke_matrix_heuristic(&Sandbox::new(Limits::default()), &p, &inst).unwrap();
        let d = DistanceMatrix::from_coords(inst.coords().unwrap());
        for i in 0..4 {
            assert_eq!(eta.at(i, i), ETA_FLOOR);
            for j in 0..4 {
                if i != j {
                    assert_eq!(eta.at(i, j), 1.0 / d.get(i, j));
                }
            }
        }
        assert_eq!(eta.clamped, 4);
    }

    #[test]
    fn wrong_shape_is_infeasible() {
        let p = parse_program(
            "fn heuristic(d) { let n = d.len(); zeros(n, n - 1) }",
            Domain::TspAco,
        )
        .unwrap();
        let err = invoke_matrix_heuristic(&Sandbox::new(Limits::default()), &p, &square()).unwrap_err();
        assert_eq!(err.status, ExecStatus::InfeasibleOutput);
        let p = parse_program("fn heuristic(d) { let n = d.len(); full(n, n, -1.0) }", Domain::TspAco).unwrap();
        let err = invoke_matrix_heuristic(&Sandbox::new(Limits::default()), &p, &square()).unwrap_err();
        assert_eq!(err.status, ExecStatus::InfeasibleOutput);
    }

    #[test]
    fn knapsack_vector_is_accepted() {
        let ds = generate(Domain::MkpAco, Role::Design, 6, 1, 5).unwrap();
        let p = parse_program(
            "fn heuristic(prize, weight) {
                let out = [];
                for j in 0..prize.len() { out.push(prize[j] / mean(weight[j])); }
                out
            }",
            Domain::MkpAco,
        )
        .unwrap();
        let eta = invoke_matrix_heuristic(&Sandbox::new(Limits::default()), &p, &ds.instances[0]).unwrap();
        assert_eq!(eta.values.len(), 6);
        assert!(eta.values.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn infinite_loop_times_out() {
        let p = parse_program("fn heuristic(d) { loop { } }", Domain::TspAco).unwrap();
        let limits = Limits {
            matrix_call: Duration::from_millis(200),
            ..Limits::default()
        };
        let start = Instant::now();
        let out = sandbox_execute(&p, heuristic_args(Domain::TspAco, &square()).unwrap(), &limits);
        assert_eq!(out.status, ExecStatus::Timeout);
        assert!(start.elapsed() < Duration::from_secs(2));
    }

    #[test]
    fn capabilities_are_absent() {
        for src in [
            "fn heuristic(d) { import \"/etc/passwd\" as m; d }",
            "fn heuristic(d) { open_file(\"/etc/passwd\") }",
            "fn heuristic(d) { timestamp() }",
        ] {
            let p = parse_program(src, Domain::TspAco).unwrap();
            let out = sandbox_execute(&p, heuristic_args(Domain::TspAco, &square()).unwrap(), &Limits::default());
            assert_eq!(out.status, ExecStatus::RuntimeError, "{src}");
        }
        assert!(parse_program("fn heuristic(d) { eval(\"1\") }", Domain::TspAco).is_err());
    }

    #[test]
    fn execution_is_repeatable() {
        let p = parse_program(
            "fn heuristic(d) { let n = d.len(); let m = zeros(n, n); for i in 0..n { m[i] = d[i]; m[i][i] = 1.0; } m }",
            Domain::TspAco,
        )
        .unwrap();
        let args = || heuristic_args(Domain::TspAco, &square()).unwrap();
        let a = sandbox_execute(&p, args(), &Limits::default());
        let b = sandbox_execute(&p, args(), &Limits::default());
        assert_eq!(a.status, ExecStatus::Ok);
        assert_eq!(
            read_matrix(a.value.as_ref().unwrap(), 4).unwrap(),
            read_matrix(b.value.as_ref().unwrap(), 4).unwrap()
        );
    }

    #[test]
    fn numeric_helpers() {
        let p = parse_program(
            "fn heuristic(d) { [sum([1, 2.5]), mean([1.0, 3.0]), std([1.0, 3.0]), amin([3, 1]), amax([3, 1]), argmin([3.0, 1.0]), argmax([3.0, 1.0]), inf()] }",
            Domain::MkpAco,
        );
        // arity mismatch for mkp, so bind to tsp_aco instead
        assert!(p.is_err());
        let p = parse_program(
            "fn heuristic(d) { [sum([1, 2.5]), mean([1.0, 3.0]), std([1.0, 3.0]), amin([3, 1]), amax([3, 1]), argmin([3.0, 1.0]), argmax([3.0, 1.0]), inf()] }",
            Domain::TspAco,
        )
        .unwrap();
        let out = sandbox_execute(&p, heuristic_args(Domain::TspAco, &square()).unwrap(), &Limits::default());
        let v = read_vector(out.value.as_ref().unwrap(), 8).unwrap();
        assert_eq!(v, vec![3.5, 2.0, 1.0, 1.0, 3.0, 1.0, 0.0, f64::INFINITY]);
    }
}
