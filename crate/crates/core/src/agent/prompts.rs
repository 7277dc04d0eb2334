//! System and user prompt templates and per-domain problem information.

use crate::diagnostics::tool_catalog;
use crate::domain::{Backbone, Direction, Domain};
use crate::programhost::interface_for;
use crate::solvers::aco_defaults;

use super::action::{FINAL_MARKER, TOOL_CALL_CLOSE, TOOL_CALL_OPEN};

pub const SYSTEM_TEMPLATE: &str = "You design heuristic algorithms for {task_brief}. \
Improve the current heuristic step by step; the goal is to optimize {objective_text}.

{tool_catalog}

Call a tool by replying with a block of this exact form:
{tool_open}
{\"name\": \"analyze_instances\", \"arguments\": {\"scope\": \"summary\"}}
{tool_close}

Submit a candidate for evaluation on the training instances by replying with one fenced code block:
```rhai
<complete program>
```
Each evaluation consumes one evaluator call from a fixed budget, whether the candidate succeeds or fails. Tool calls are free.

Programs are written in Rhai: `fn name(a, b) { ... }`, `let x = 1.0;`, arrays `[1, 2]`, `for i in 0..n { }`, `while cond { }`, `if a < b { } else { }`; the last expression is the return value. Integers and floats do not mix implicitly: use `to_float()` / `to_int()`. \
Helpers: zeros(n), zeros(n, m), full(n, v), full(n, m, v), sum(a), mean(a), std(a), amin(a), amax(a), argmin(a), argmax(a), inf(). \
There is no file, network, clock or module access.

Rules: revise the code over several turns using tool output and training results. Do not submit the initial code unchanged as your final answer. \
When you are done, reply with the marker {final_marker} followed by the complete program and nothing else.";

pub const USER_TEMPLATE: &str = "Design the required heuristic function.

Problem: {problem_description}

How the heuristic is used: {algorithm_details}

Function interface:
{function_signature}

Current baseline code:
```rhai
{initial_code}
```

Baseline objective on the training set: {baseline_objective}

Objective: {objective_direction}. Improve on the baseline using training-set feedback only.

Constraints: the entry function must be named {function_name} with exactly the parameters shown. \
Its return value must satisfy the validity rules above. The code must be deterministic.

Each observation (tool output or evaluation result) is appended to this conversation. \
You may then revise a candidate, call a tool, submit a new candidate for evaluation, or finish.

Final answer format: {final_marker} followed by the complete program.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemInfo {
    pub target: &'static str,
    pub unit: &'static str,
    pub description: &'static str,
}

pub fn problem_info(domain: Domain) -> ProblemInfo {
    match domain {
        Domain::TspC => ProblemInfo {
            target: "Next-node selector",
            unit: "Tour length",
            description: "Build a closed tour through all nodes, visiting each exactly once and ending back at the start. \
The heuristic picks which node to visit next while the tour is built one step at a time.",
        },
        Domain::CvrpC => ProblemInfo {
            target: "Next-node selector",
            unit: "Travel distance",
            description: "Vehicles with a fixed capacity leave the depot and serve customers with known demands. \
Keep the total route length small; the load on any route may not exceed the capacity.",
        },
        Domain::OvrpC => ProblemInfo {
            target: "Next-node selector",
            unit: "Travel distance",
            description: "Serve every customer with capacitated vehicle routes that do not have to drive back to the depot at the end. \
Keep the total travel distance small.",
        },
        Domain::TspAco => ProblemInfo {
            target: "Heuristic matrix",
            unit: "Tour length",
            description: "Give the ant colony heuristic information: edges that are short or otherwise promising for a TSP tour should get high desirability.",
        },
        Domain::CvrpAco => ProblemInfo {
            target: "Heuristic matrix",
            unit: "Travel distance",
            description: "Give the ant colony heuristic information for moves between customers under vehicle capacity limits, \
trading off short travel against keeping routes feasible.",
        },
        Domain::OpAco => ProblemInfo {
            target: "Heuristic matrix",
            unit: "Collected reward",
            description: "Choose which prize-carrying locations to visit on a single route from the depot whose length is limited. \
The heuristic rates how desirable each move is for collecting prize within the length limit.",
        },
        Domain::MkpAco => ProblemInfo {
            target: "Heuristic score",
            unit: "Packed profit",
            description: "Pick items for a knapsack with several capacity constraints at once. \
The heuristic rates how desirable each item is for the ant colony construction.",
        },
    }
}

pub fn algorithm_details(domain: Domain) -> String {
    match domain.backbone() {
        Backbone::Constructive => {
            let extra = match domain {
                Domain::TspC => "The tour starts at node 0; your function is called once per step with the nodes not yet visited.",
                Domain::CvrpC => "Routes start and end at the depot (node 0). Only customers that fit the remaining capacity are offered; when none fit, the vehicle returns automatically.",
                Domain::OvrpC => "Routes start at the depot (node 0). Only customers that fit the remaining capacity are offered; the last route does not return to the depot.",
                _ => "",
            };
            format!("Greedy step-by-step construction. {extra}")
        }
        Backbone::Aco => {
            let c = aco_defaults(domain).expect("aco domain");
            format!(
                "Ant colony optimization with {} ants and {} iterations. Ants choose moves with probability proportional to \
pheromone^{} * heuristic^{}; pheromone is multiplied by {} each iteration and reinforced along good solutions. \
Your function is called once per instance and its output is the heuristic term. Values are clamped to at least 1e-10; \
non-finite or negative values are invalid.",
                c.ants,
                c.iterations,
                c.alpha,
                c.beta,
                c.decay
            )
        }
    }
}

fn objective_direction(domain: Domain) -> String {
    let unit = problem_info(domain).unit;
    match domain.direction() {
        Direction::Minimize => format!("minimize ({unit}, lower is better)"),
        Direction::Maximize => format!("maximize ({unit}, higher is better)"),
    }
}

/// Text slots of the templates; `None` is a missing value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptContext {
    pub task_brief: Option<String>,
    pub objective_text: Option<String>,
    pub problem_description: Option<String>,
    pub algorithm_details: Option<String>,
    pub function_signature: Option<String>,
    pub function_name: Option<String>,
    pub initial_code: Option<String>,
    pub baseline_objective: Option<String>,
    pub objective_direction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prompt placeholder `{0}` has no value")]
pub struct MissingPlaceholder(pub String);

impl PromptContext {
    /// Every slot filled from the domain tables except the initial code and
    /// its objective.
    pub fn for_domain(domain: Domain) -> Self {
        let info = problem_info(domain);
        let iface = interface_for(domain);
        Self {
            task_brief: Some(format!("the {} problem", domain.display_name())),
            objective_text: Some(format!("the mean {} on the training instances", info.unit.to_lowercase())),
            problem_description: Some(info.description.to_string()),
            algorithm_details: Some(algorithm_details(domain)),
            function_signature: Some(iface.signature.to_string()),
            function_name: Some(iface.entry.to_string()),
            initial_code: None,
            baseline_objective: None,
            objective_direction: Some(objective_direction(domain)),
        }
    }

    fn slots(&self) -> [(&'static str, &Option<String>); 9] {
        [
            ("task_brief", &self.task_brief),
            ("objective_text", &self.objective_text),
            ("problem_description", &self.problem_description),
            ("algorithm_details", &self.algorithm_details),
            ("function_signature", &self.function_signature),
            ("function_name", &self.function_name),
            ("initial_code", &self.initial_code),
            ("baseline_objective", &self.baseline_objective),
            ("objective_direction", &self.objective_direction),
        ]
    }
}

fn fill(template: &str, ctx: &PromptContext) -> Result<String, MissingPlaceholder> {
    let mut out = template
        .replace("{tool_catalog}", tool_catalog())
        .replace("{tool_open}", TOOL_CALL_OPEN)
        .replace("{tool_close}", TOOL_CALL_CLOSE)
        .replace("{final_marker}", FINAL_MARKER);
    for (name, value) in ctx.slots() {
        let key = format!("{{{name}}}");
        if out.contains(&key) {
            let v = value.as_ref().ok_or_else(|| MissingPlaceholder(name.to_string()))?;
            out = out.replace(&key, v.trim_end());
        }
    }
    Ok(out)
}

/// `(system, user)` prompts with every placeholder substituted.
pub fn render_prompts(ctx: &PromptContext) -> Result<(String, String), MissingPlaceholder> {
    Ok((fill(SYSTEM_TEMPLATE, ctx)?, fill(USER_TEMPLATE, ctx)?))
}
