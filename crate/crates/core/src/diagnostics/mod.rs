//! Read-only diagnostic tools: instance analysis of the design set and
//! structural novelty of a candidate against earlier attempts. Neither tool
//! executes candidates, so calls never touch the evaluator budget.

mod instances;
mod kdtree;
mod novelty;
mod spatial;

pub use instances::{
    analyze_instances, design_features, instance_features, knapsack_features, spatial_features, summarize,
    AnalysisResult, AnalysisScope, FeatureGap, InstanceAnalysis, InstanceFeatureSummary, InstanceFeatures,
    KnapsackFeatures, MetricStat,
};
pub use kdtree::KdTree;
pub use novelty::{
    ast_novelty, combined_similarity, node_similarity, novelty_hint, sequence_ratio, tree_similarity,
    AstNoveltyReport, NoveltyMatch, Similarity, DEFAULT_HINT_THRESHOLD, DEFAULT_TOP_K, NODE_WEIGHT, RAW_WEIGHT,
    SHAPE_WEIGHT,
};
pub use spatial::{
    cluster_structure, convex_hull, demand_pattern, density_and_hull, density_clusters, histogram_grid,
    nearest_neighbor_distances, nn_statistics, silhouette, ClusterStats, DemandPattern, DensityHull, NnStats,
    MIN_CLUSTER_NEIGHBORS, MORAN_NEIGHBORS,
};

use crate::instancegen::DesignSet;
use crate::programhost::ProgramError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Version of the tool names and argument schema below.
pub const TOOL_SCHEMA_VERSION: u32 = 1;
pub const ANALYZE_INSTANCES: &str = "analyze_instances";
pub const AST_NOVELTY: &str = "ast_novelty";

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("invalid arguments: {0}")]
    InvalidArgument(String),
    #[error("candidate does not parse: {0}")]
    Parse(#[from] ProgramError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub hint_threshold: f64,
    pub top_k: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            hint_threshold: DEFAULT_HINT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToolRequest {
    AnalyzeInstances(AnalysisScope),
    AstNovelty { source: String, top_k: Option<usize> },
}

impl ToolRequest {
    /// Validates a named call with JSON object arguments.
    pub fn parse(name: &str, args: &Value) -> Result<Self, DiagnosticError> {
        let obj = match args {
            Value::Object(m) => m.clone(),
            Value::Null => Default::default(),
            _ => return Err(DiagnosticError::InvalidArgument("arguments must be a JSON object".into())),
        };
        let str_arg = |key: &str| -> Result<Option<String>, DiagnosticError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(DiagnosticError::InvalidArgument(format!("`{key}` must be a string"))),
            }
        };
        match name {
            ANALYZE_INSTANCES => {
                let scope = str_arg("scope")?.unwrap_or_else(|| "summary".into());
                let id = str_arg("instance_id")?;
                let scope = match (scope.as_str(), id) {
                    ("summary", None) => AnalysisScope::Summary,
                    ("contrastive_pair", None) => AnalysisScope::ContrastivePair,
                    ("single_instance", Some(id)) => AnalysisScope::SingleInstance(id),
                    ("single_instance", None) => {
                        return Err(DiagnosticError::InvalidArgument(
                            "scope single_instance requires `instance_id`".into(),
                        ))
                    }
                    ("summary" | "contrastive_pair", Some(_)) => {
                        return Err(DiagnosticError::InvalidArgument(format!(
                            "`instance_id` is only valid with scope single_instance, not {scope}"
                        )))
                    }
                    (other, _) => {
                        return Err(DiagnosticError::InvalidArgument(format!(
                            "unknown scope `{other}` (summary, single_instance, contrastive_pair)"
                        )))
                    }
                };
                Ok(ToolRequest::AnalyzeInstances(scope))
            }
            AST_NOVELTY => {
                let source = str_arg("source")?
                    .or(str_arg("code")?)
                    .ok_or_else(|| DiagnosticError::InvalidArgument("`source` is required".into()))?;
                let top_k = match obj.get("top_k") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(
                        v.as_u64()
                            .filter(|&k| k > 0)
                            .ok_or_else(|| DiagnosticError::InvalidArgument("`top_k` must be a positive integer".into()))?
                            as usize,
                    ),
                };
                Ok(ToolRequest::AstNovelty { source, top_k })
            }
            other => Err(DiagnosticError::UnknownTool(other.to_string())),
        }
    }

    pub fn tool_name(&self) -> &'static str {
        match self {
            ToolRequest::AnalyzeInstances(_) => ANALYZE_INSTANCES,
            ToolRequest::AstNovelty { .. } => AST_NOVELTY,
        }
    }
}

/// Free text for the agent plus a structured record for logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub tool: String,
    pub text: String,
    pub metrics: Value,
}

/// Runs a tool against the design set and the prior attempts `(id, source)`.
pub fn run_tool(
    request: &ToolRequest,
    design: &DesignSet,
    history: &[(u64, &str)],
    config: &DiagnosticsConfig,
) -> Result<ToolOutput, DiagnosticError> {
    match request {
        ToolRequest::AnalyzeInstances(scope) => {
            let a = analyze_instances(design, scope)?;
            Ok(ToolOutput {
                tool: ANALYZE_INSTANCES.into(),
                text: a.text,
                metrics: serde_json::to_value(&a.result).expect("analysis serializes"),
            })
        }
        ToolRequest::AstNovelty { source, top_k } => {
            let r = ast_novelty(history, source, top_k.unwrap_or(config.top_k), config.hint_threshold)?;
            Ok(ToolOutput {
                tool: AST_NOVELTY.into(),
                text: r.text(),
                metrics: serde_json::to_value(&r).expect("report serializes"),
            })
        }
    }
}

/// Tool descriptions shown to the agent.
pub fn tool_catalog() -> &'static str {
    r#"Diagnostic tools (free; they do not consume evaluator budget):
- analyze_instances {"scope": "summary" | "single_instance" | "contrastive_pair", "instance_id": string (single_instance only)}
  Spatial and structural statistics of the design instances: nearest-neighbour spread, clustering, density, convex hull, and demand autocorrelation where demands exist.
- ast_novelty {"source": string, "top_k": integer (optional, default 3)}
  Structural similarity of a candidate to your earlier attempts; novelty = 1 - highest similarity."#
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::instancegen::{generate, Role};
    use serde_json::json;

    #[test]
    fn argument_validation() {
        assert_eq!(
            ToolRequest::parse(ANALYZE_INSTANCES, &json!({})).unwrap(),
            ToolRequest::AnalyzeInstances(AnalysisScope::Summary)
        );
        assert_eq!(
            ToolRequest::parse(ANALYZE_INSTANCES, &json!({"scope": "single_instance", "instance_id": "x"})).unwrap(),
            ToolRequest::AnalyzeInstances(AnalysisScope::SingleInstance("x".into()))
        );
        for bad in [
            json!({"scope": "single_instance"}),
            json!({"scope": "summary", "instance_id": "x"}),
            json!({"scope": "everything"}),
            json!([1, 2]),
        ] {
            assert!(matches!(
                ToolRequest::parse(ANALYZE_INSTANCES, &bad),
                Err(DiagnosticError::InvalidArgument(_))
            ));
        }
        assert!(matches!(
            ToolRequest::parse("run_solver", &json!({})),
            Err(DiagnosticError::UnknownTool(_))
        ));
        assert!(ToolRequest::parse(AST_NOVELTY, &json!({"top_k": 0, "source": "fn f() {}"})).is_err());
    }

    #[test]
    fn tools_produce_text_and_metrics() {
        let design = DesignSet::new(generate(Domain::TspAco, Role::Design, 20, 3, 2).unwrap()).unwrap();
        let cfg = DiagnosticsConfig::default();
        let out = run_tool(&ToolRequest::AnalyzeInstances(AnalysisScope::Summary), &design, &[], &cfg).unwrap();
        assert_eq!(out.metrics["scope"], "summary");
        let req = ToolRequest::AstNovelty {
            source: "fn heuristic(d) { d }".into(),
            top_k: None,
        };
        let out = run_tool(&req, &design, &[(1, "fn heuristic(d) { d }")], &cfg).unwrap();
        assert_eq!(out.metrics["novelty"], 0.0);
        assert!(out.text.contains("attempt 1"));
    }
}
