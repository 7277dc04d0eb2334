//! Parsing a model turn into exactly one action.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Marks the final answer; everything after it is the final program.
pub const FINAL_MARKER: &str = "#### FINAL SOLUTION ####";
pub const TOOL_CALL_OPEN: &str = "<tool_call>";
pub const TOOL_CALL_CLOSE: &str = "</tool_call>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TurnAction {
    ToolCall { name: String, args: Value },
    Evaluate { source: String },
    Final { source: String },
    Malformed { reason: String },
}

impl TurnAction {
    pub fn kind(&self) -> &'static str {
        match self {
            TurnAction::ToolCall { .. } => "tool_call",
            TurnAction::Evaluate { .. } => "evaluate",
            TurnAction::Final { .. } => "final",
            TurnAction::Malformed { .. } => "malformed",
        }
    }
}

/// Body of the first fenced block (any info string), if one is closed.
pub fn first_fenced_block(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // skip the info string up to the end of the opening line
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim_end().to_string() + "\n")
}

fn parse_tool_call(text: &str) -> Option<TurnAction> {
    let start = text.find(TOOL_CALL_OPEN)?;
    let rest = &text[start + TOOL_CALL_OPEN.len()..];
    let Some(end) = rest.find(TOOL_CALL_CLOSE) else {
        return Some(TurnAction::Malformed {
            reason: format!("`{TOOL_CALL_OPEN}` without a closing `{TOOL_CALL_CLOSE}`"),
        });
    };
    let body: Value = match serde_json::from_str(rest[..end].trim()) {
        Ok(v) => v,
        Err(e) => {
            return Some(TurnAction::Malformed {
                reason: format!("tool call is not valid JSON: {e}"),
            })
        }
    };
    let Some(name) = body.get("name").and_then(Value::as_str) else {
        return Some(TurnAction::Malformed {
            reason: "tool call needs a string `name`".into(),
        });
    };
    let args = body
        .get("arguments")
        .or_else(|| body.get("args"))
        .cloned()
        .unwrap_or(Value::Object(Default::default()));
    Some(TurnAction::ToolCall {
        name: name.to_string(),
        args,
    })
}

/// Precedence: final marker, then a tool-call block, then a fenced program
/// to evaluate. Anything else is malformed.
pub fn parse_action(output: &str) -> TurnAction {
    if let Some(pos) = output.find(FINAL_MARKER) {
        let tail = &output[pos + FINAL_MARKER.len()..];
        let source = first_fenced_block(tail).unwrap_or_else(|| tail.trim().to_string());
        return if source.trim().is_empty() {
            TurnAction::Malformed {
                reason: "the final marker must be followed by the complete program".into(),
            }
        } else {
            TurnAction::Final { source }
        };
    }
    if let Some(action) = parse_tool_call(output) {
        return action;
    }
    match first_fenced_block(output) {
        Some(source) if !source.trim().is_empty() => TurnAction::Evaluate { source },
        _ => TurnAction::Malformed {
            reason: "no final marker, tool call or fenced code block found".into(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn final_marker_takes_code_after_it() {
        let a = parse_action("Done.\n#### FINAL SOLUTION ####\n```rhai\nfn heuristic(d) { d }\n```\n");
        assert_eq!(
            a,
            TurnAction::Final {
                source: "fn heuristic(d) { d }\n".into()
            }
        );
        let bare = parse_action("#### FINAL SOLUTION ####\nfn heuristic(d) { d }");
        assert_eq!(
            bare,
            TurnAction::Final {
                source: "fn heuristic(d) { d }".into()
            }
        );
        // near-miss markers are not finals
        assert!(matches!(parse_action("### FINAL SOLUTION ###\nfn f() {}"), TurnAction::Malformed { .. }));
        assert!(matches!(parse_action("#### FINAL SOLUTION ####\n  "), TurnAction::Malformed { .. }));
    }

    #[test]
    fn tool_calls() {
        let a = parse_action(
            "Let me look.\n<tool_call>\n{\"name\": \"analyze_instances\", \"arguments\": {\"scope\": \"summary\"}}\n</tool_call>",
        );
        assert_eq!(
            a,
            TurnAction::ToolCall {
                name: "analyze_instances".into(),
                args: json!({"scope": "summary"})
            }
        );
        assert!(matches!(parse_action("<tool_call>{oops}</tool_call>"), TurnAction::Malformed { .. }));
        assert!(matches!(parse_action("<tool_call>{\"name\": 3}</tool_call>"), TurnAction::Malformed { .. }));
    }

    #[test]
    fn fenced_code_is_evaluated() {
        let a = parse_action("Try this:\n```\nfn heuristic(d) {\n  d\n}\n```\nand another ```x```");
        assert_eq!(
            a,
            TurnAction::Evaluate {
                source: "fn heuristic(d) {\n  d\n}\n".into()
            }
        );
        assert!(matches!(parse_action("I think we should use 2-opt."), TurnAction::Malformed { .. }));
        assert!(matches!(parse_action("```rhai\nunterminated"), TurnAction::Malformed { .. }));
    }
}
