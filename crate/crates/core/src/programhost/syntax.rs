//! Flattened syntax trees for structural comparison of programs.
//!
//! A program becomes a preorder list of nodes. Each node carries its depth,
//! a kind label, a category, and two payloads: the literal one (identifier
//! names, literal values) and a normalized one where variables become `VAR`,
//! parameters of the enclosing function become `ARG`, and literals become
//! `NUM`/`STR`/`BOOL`. Operators, builtin call names and property names are
//! structural and survive normalization.

use rhai::{ASTFlags, ASTNode, Expr, Stmt, AST};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeCategory {
    Function,
    Argument,
    Declaration,
    Assignment,
    Branch,
    Loop,
    Call,
    BinaryOp,
    Comparison,
    BoolOp,
    UnaryOp,
    Literal,
    Name,
    Index,
    Attribute,
    Collection,
    Return,
    Jump,
    Block,
    Other,
}

impl NodeCategory {
    pub const ALL: [NodeCategory; 20] = [
        NodeCategory::Function,
        NodeCategory::Argument,
        NodeCategory::Declaration,
        NodeCategory::Assignment,
        NodeCategory::Branch,
        NodeCategory::Loop,
        NodeCategory::Call,
        NodeCategory::BinaryOp,
        NodeCategory::Comparison,
        NodeCategory::BoolOp,
        NodeCategory::UnaryOp,
        NodeCategory::Literal,
        NodeCategory::Name,
        NodeCategory::Index,
        NodeCategory::Attribute,
        NodeCategory::Collection,
        NodeCategory::Return,
        NodeCategory::Jump,
        NodeCategory::Block,
        NodeCategory::Other,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxNode {
    pub depth: usize,
    pub kind: &'static str,
    pub category: NodeCategory,
    pub raw: Option<String>,
    pub shape: Option<String>,
}

impl SyntaxNode {
    fn token(&self, payload: &Option<String>) -> String {
        match payload {
            Some(p) => format!("{}:{}({})", self.depth, self.kind, p),
            None => format!("{}:{}", self.depth, self.kind),
        }
    }

    pub fn raw_token(&self) -> String {
        self.token(&self.raw)
    }

    pub fn shape_token(&self) -> String {
        self.token(&self.shape)
    }
}

/// Counts reported for a candidate program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub nodes: usize,
    pub branches: usize,
    pub loops: usize,
    pub constants: usize,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxTree {
    nodes: Vec<SyntaxNode>,
}

fn is_operator(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| "+-*/%<>=!&|^~.".contains(c))
}

struct Builder<'p> {
    params: &'p BTreeSet<String>,
    script_fns: &'p BTreeSet<String>,
}

impl Builder<'_> {
    fn name_node(&self, name: &str) -> (NodeCategory, String) {
        if self.params.contains(name) {
            (NodeCategory::Argument, "ARG".into())
        } else {
            (NodeCategory::Name, "VAR".into())
        }
    }

    fn call_shape(&self, name: &str) -> String {
        if self.script_fns.contains(name) {
            "FN".into()
        } else {
            name.to_string()
        }
    }

    /// Maps a visited AST node to (kind, category, raw payload, shape payload).
    /// `None` marks wrapper nodes that are not emitted.
    #[allow(clippy::type_complexity)]
    fn classify(
        &self,
        node: &ASTNode,
    ) -> Option<(&'static str, NodeCategory, Option<String>, Option<String>)> {
        use NodeCategory as C;
        let plain = |k, c| Some((k, c, None, None));
        let same = |k, c, p: String| Some((k, c, Some(p.clone()), Some(p)));
        match node {
            ASTNode::Stmt(s) => match s {
                Stmt::Noop(..) | Stmt::Expr(..) => None,
                Stmt::If(..) => plain("If", C::Branch),
                Stmt::Switch(..) => plain("Switch", C::Branch),
                Stmt::While(x, ..) => match x.expr {
                    Expr::Unit(..) => plain("Loop", C::Loop),
                    _ => plain("While", C::Loop),
                },
                Stmt::Do(..) => plain("Do", C::Loop),
                Stmt::For(x, ..) => Some((
                    "For",
                    C::Loop,
                    Some(x.0.name.to_string()),
                    Some("VAR".into()),
                )),
                Stmt::Var(x, flags, ..) => {
                    let kind = if flags.contains(ASTFlags::CONSTANT) { "Const" } else { "Let" };
                    Some((kind, C::Declaration, Some(x.0.name.to_string()), Some("VAR".into())))
                }
                Stmt::Assignment(x) => {
                    let op = x
                        .0
                        .get_op_assignment_info()
                        .map_or("=", |(_, _, _, op, _, _)| op);
                    same("Assign", C::Assignment, op.to_string())
                }
                Stmt::FnCall(x, ..) => Some((
                    "Call",
                    C::Call,
                    Some(x.name.to_string()),
                    Some(self.call_shape(&x.name)),
                )),
                Stmt::Block(..) => plain("Block", C::Block),
                Stmt::TryCatch(..) => plain("Try", C::Other),
                Stmt::BreakLoop(_, flags, ..) => {
                    if flags.contains(ASTFlags::BREAK) {
                        plain("Break", C::Jump)
                    } else {
                        plain("Continue", C::Jump)
                    }
                }
                Stmt::Return(..) => plain("Return", C::Return),
                _ => plain("Stmt", C::Other),
            },
            ASTNode::Expr(e) => match e {
                Expr::BoolConstant(b, ..) => {
                    Some(("Lit", C::Literal, Some(b.to_string()), Some("BOOL".into())))
                }
                Expr::IntegerConstant(i, ..) => {
                    Some(("Lit", C::Literal, Some(i.to_string()), Some("NUM".into())))
                }
                Expr::FloatConstant(f, ..) => {
                    Some(("Lit", C::Literal, Some(f.to_string()), Some("NUM".into())))
                }
                Expr::CharConstant(c, ..) => {
                    Some(("Lit", C::Literal, Some(format!("{c:?}")), Some("STR".into())))
                }
                Expr::StringConstant(s, ..) => {
                    Some(("Lit", C::Literal, Some(format!("{:?}", s.as_str())), Some("STR".into())))
                }
                Expr::DynamicConstant(d, ..) => {
                    let shape = if d.is_int() || d.is_float() {
                        "NUM"
                    } else if d.is_bool() {
                        "BOOL"
                    } else if d.is_string() || d.is_char() {
                        "STR"
                    } else {
                        "CONST"
                    };
                    Some(("Lit", C::Literal, Some(d.to_string()), Some(shape.into())))
                }
                Expr::InterpolatedString(..) => plain("FString", C::Literal),
                Expr::Unit(..) => plain("Unit", C::Literal),
                Expr::Array(..) => plain("Array", C::Collection),
                Expr::Map(..) => plain("Map", C::Collection),
                Expr::Variable(x, ..) => {
                    let (cat, shape) = self.name_node(&x.1);
                    Some(("Name", cat, Some(x.1.to_string()), Some(shape)))
                }
                Expr::ThisPtr(..) => same("Name", C::Name, "this".into()),
                Expr::Property(x, ..) => same("Attr", C::Attribute, x.2.to_string()),
                Expr::MethodCall(x, ..) => same("Method", C::Call, x.name.to_string()),
                Expr::Stmt(..) => plain("Block", C::Block),
                Expr::FnCall(x, ..) => {
                    let name = x.name.as_str();
                    if !is_operator(name) {
                        return Some((
                            "Call",
                            C::Call,
                            Some(name.to_string()),
                            Some(self.call_shape(name)),
                        ));
                    }
                    let (kind, cat) = match name {
                        "<" | ">" | "<=" | ">=" | "==" | "!=" => ("Compare", C::Comparison),
                        ".." | "..=" => ("Range", C::Other),
                        _ if x.args.len() == 1 => ("UnaryOp", C::UnaryOp),
                        _ => ("BinOp", C::BinaryOp),
                    };
                    same(kind, cat, name.to_string())
                }
                Expr::Dot(..) => plain("Dot", C::Other),
                Expr::Index(..) => plain("Index", C::Index),
                Expr::And(..) => same("BoolOp", C::BoolOp, "&&".into()),
                Expr::Or(..) => same("BoolOp", C::BoolOp, "||".into()),
                Expr::Coalesce(..) => same("BoolOp", C::BoolOp, "??".into()),
                _ => plain("Expr", C::Other),
            },
            _ => plain("Node", C::Other),
        }
    }

    fn node(&self, node: &ASTNode, ancestors: &[ASTNode], base: usize) -> Option<SyntaxNode> {
        let (kind, category, raw, shape) = self.classify(node)?;
        let depth = base
            + ancestors
                .iter()
                .filter(|a| self.classify(a).is_some())
                .count();
        Some(SyntaxNode {
            depth,
            kind,
            category,
            raw,
            shape,
        })
    }
}

fn pos_key(p: rhai::Position) -> (usize, usize) {
    (p.line().unwrap_or(0), p.position().unwrap_or(0))
}

impl SyntaxTree {
    pub fn from_ast(ast: &AST) -> Self {
        // Source order, so renaming a helper does not reorder the stream.
        let mut defs: Vec<_> = ast.iter_fn_def().collect();
        defs.sort_by_key(|f| (pos_key(f.body.start_position()), f.name.to_string()));
        let spans: Vec<_> = defs
            .iter()
            .map(|f| (pos_key(f.body.start_position()), pos_key(f.body.end_position())))
            .collect();
        let script_fns: BTreeSet<String> = defs.iter().map(|f| f.name.to_string()).collect();
        let params: Vec<BTreeSet<String>> = defs
            .iter()
            .map(|f| f.params.iter().map(|p| p.to_string()).collect())
            .collect();
        let none = BTreeSet::new();

        // The walk visits top-level statements and then every function body,
        // each body statement as a root; roots are attributed by source span.
        let mut top = Vec::new();
        let mut bodies: Vec<Vec<SyntaxNode>> = vec![Vec::new(); defs.len()];
        let mut owner: Option<usize> = None;
        ast.walk(&mut |path: &[ASTNode]| {
            let Some((node, ancestors)) = path.split_last() else {
                return true;
            };
            if ancestors.is_empty() {
                owner = match node {
                    ASTNode::Stmt(s) => {
                        let at = pos_key(s.position());
                        spans.iter().position(|(a, b)| *a <= at && at <= *b)
                    }
                    _ => None,
                };
            }
            let builder = Builder {
                params: owner.map_or(&none, |k| &params[k]),
                script_fns: &script_fns,
            };
            if let Some(n) = builder.node(node, ancestors, owner.is_some() as usize) {
                match owner {
                    Some(k) => bodies[k].push(n),
                    None => top.push(n),
                }
            }
            true
        });

        let mut nodes = top;
        for (def, body) in defs.iter().zip(bodies) {
            nodes.push(SyntaxNode {
                depth: 0,
                kind: "FnDef",
                category: NodeCategory::Function,
                raw: Some(def.name.to_string()),
                shape: Some("FN".into()),
            });
            for p in &def.params {
                nodes.push(SyntaxNode {
                    depth: 1,
                    kind: "Param",
                    category: NodeCategory::Argument,
                    raw: Some(p.to_string()),
                    shape: Some("ARG".into()),
                });
            }
            nodes.extend(body);
        }
        Self { nodes }
    }

    pub fn nodes(&self) -> &[SyntaxNode] {
        &self.nodes
    }

    pub fn raw_tokens(&self) -> Vec<String> {
        self.nodes.iter().map(SyntaxNode::raw_token).collect()
    }

    pub fn shape_tokens(&self) -> Vec<String> {
        self.nodes.iter().map(SyntaxNode::shape_token).collect()
    }

    pub fn category_counts(&self) -> BTreeMap<NodeCategory, usize> {
        let mut counts = BTreeMap::new();
        for n in &self.nodes {
            *counts.entry(n.category).or_insert(0) += 1;
        }
        counts
    }

    pub fn summary(&self) -> TreeSummary {
        let counts = self.category_counts();
        let c = |k| counts.get(&k).copied().unwrap_or(0);
        TreeSummary {
            nodes: self.nodes.len(),
            branches: c(NodeCategory::Branch),
            loops: c(NodeCategory::Loop),
            constants: c(NodeCategory::Literal),
            calls: c(NodeCategory::Call),
        }
    }
}
