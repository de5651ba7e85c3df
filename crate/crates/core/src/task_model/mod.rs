//! Hierarchical task models in the ConcurTaskTrees style.
//!
//! A [`TaskModel`] is a tree whose leaves are the concrete maintenance steps
//! and whose inner nodes combine children with a temporal [`Operator`]. Models
//! are authored in a small block-structured language (`.tm` files):
//!
//! ```text
//! # replace the filter cartridge
//! model "Filter swap" version "1.0"
//! task seq swap {
//!   leaf isolate { nominal=30 desc="Close the inlet valve" }
//!   task par prep {
//!     leaf drain { nominal=60 }
//!     leaf gloves { nominal=10 weight=0.5 }
//!   }
//!   task opt inspect weight=0.25 {
//!     leaf check_seal { nominal=45 contexts=[seal_wear] content.text="seal_text" }
//!   }
//! }
//! ```
//!
//! Composite ids are optional in source; unnamed composites get a generated
//! id (`<op>_<n>`) so that every node can be addressed by the automaton.

mod parser;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::user_model::InterfaceTier;

pub use parser::{parse_model, ParseError};
pub use serialize::serialize_model;

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    /// Enabling (`>>`).
    Seq,
    /// Choice (`[]`).
    Choice,
    /// Interleaving (`|||`).
    Par,
    /// Disabling (`[>`).
    Disable,
    /// Optional execution.
    Opt,
    /// Bounded iteration.
    Loop,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::Seq,
        Operator::Choice,
        Operator::Par,
        Operator::Disable,
        Operator::Opt,
        Operator::Loop,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Seq => "seq",
            Operator::Choice => "choice",
            Operator::Par => "par",
            Operator::Disable => "disable",
            Operator::Opt => "opt",
            Operator::Loop => "loop",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|op| op.keyword() == s)
    }

    /// Checks a child count against the operator's arity rule.
    pub fn arity_ok(self, children: usize) -> bool {
        match self {
            Operator::Seq | Operator::Choice | Operator::Par => children >= 2,
            Operator::Disable => children == 2,
            Operator::Opt | Operator::Loop => children == 1,
        }
    }

    pub fn arity_rule(self) -> &'static str {
        match self {
            Operator::Seq | Operator::Choice | Operator::Par => "at least 2 children",
            Operator::Disable => "exactly 2 children",
            Operator::Opt | Operator::Loop => "exactly 1 child",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafTask {
    pub id: String,
    pub description: String,
    /// Expected completion time in whole seconds.
    pub nominal_duration: u32,
    pub weight: f64,
    pub context_refs: Vec<String>,
    pub content_keys: BTreeMap<InterfaceTier, String>,
}

impl LeafTask {
    pub fn new(id: impl Into<String>, nominal_duration: u32) -> Self {
        LeafTask {
            id: id.into(),
            description: String::new(),
            nominal_duration,
            weight: 1.0,
            context_refs: Vec::new(),
            content_keys: BTreeMap::new(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeTask {
    pub id: String,
    pub operator: Operator,
    pub children: Vec<TaskNode>,
    /// Required iff `operator == Loop`.
    pub loop_bound: Option<u32>,
    /// Weight of the explicit Skip (opt) or ExitLoop (loop) action.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TaskNode {
    Leaf(LeafTask),
    Composite(CompositeTask),
}

impl TaskNode {
    pub fn id(&self) -> &str {
        match self {
            TaskNode::Leaf(l) => &l.id,
            TaskNode::Composite(c) => &c.id,
        }
    }

    pub fn leaf(id: &str, nominal: u32) -> TaskNode {
        TaskNode::Leaf(LeafTask::new(id, nominal))
    }

    pub fn composite(id: &str, operator: Operator, children: Vec<TaskNode>) -> TaskNode {
        TaskNode::Composite(CompositeTask {
            id: id.to_string(),
            operator,
            children,
            loop_bound: None,
            weight: 1.0,
        })
    }

    pub fn looped(id: &str, bound: u32, child: TaskNode) -> TaskNode {
        TaskNode::Composite(CompositeTask {
            id: id.to_string(),
            operator: Operator::Loop,
            children: vec![child],
            loop_bound: Some(bound),
            weight: 1.0,
        })
    }

    fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a TaskNode)) {
        visit(self);
        if let TaskNode::Composite(c) = self {
            for child in &c.children {
                child.walk(visit);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskModel {
    pub name: String,
    pub version: String,
    pub root: TaskNode,
}

impl TaskModel {
    pub fn new(name: impl Into<String>, root: TaskNode) -> Self {
        TaskModel {
            name: name.into(),
            version: "1".to_string(),
            root,
        }
    }

    /// Leaves in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<&LeafTask> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| {
            if let TaskNode::Leaf(l) = n {
                out.push(l);
            }
        });
        out
    }

    pub fn leaf(&self, id: &str) -> Option<&LeafTask> {
        self.leaves().into_iter().find(|l| l.id == id)
    }

    pub fn find(&self, id: &str) -> Option<&TaskNode> {
        let mut found = None;
        self.root.walk(&mut |n| {
            if found.is_none() && n.id() == id {
                found = Some(n);
            }
        });
        found
    }

    /// All node ids in pre-order.
    pub fn node_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| out.push(n.id()));
        out
    }

    /// Checks structural invariants and cross-references.
    ///
    /// Returns one diagnostic per violation; an empty list means the model is
    /// valid within `scope`.
    pub fn validate(&self, scope: &ValidationScope) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut seen = BTreeSet::new();
        self.root.walk(&mut |n| {
            let id = n.id();
            if !is_identifier(id) {
                diags.push(Diagnostic::new(id, DiagnosticKind::InvalidIdentifier));
            }
            if !seen.insert(id) {
                diags.push(Diagnostic::new(id, DiagnosticKind::DuplicateId));
            }
            match n {
                TaskNode::Leaf(l) => {
                    if l.nominal_duration == 0 {
                        diags.push(Diagnostic::new(id, DiagnosticKind::NonPositiveDuration));
                    }
                    if !(l.weight > 0.0 && l.weight.is_finite()) {
                        diags.push(Diagnostic::new(id, DiagnosticKind::NonPositiveWeight));
                    }
                    for r in &l.context_refs {
                        if !scope.context_ids.contains(r) {
                            diags.push(Diagnostic::new(
                                id,
                                DiagnosticKind::UnresolvedContextRef(r.clone()),
                            ));
                        }
                    }
                    for (tier, key) in &l.content_keys {
                        if !scope.content_keys.contains(&(key.clone(), *tier)) {
                            diags.push(Diagnostic::new(
                                id,
                                DiagnosticKind::UnresolvedContentKey(*tier, key.clone()),
                            ));
                        }
                    }
                }
                TaskNode::Composite(c) => {
                    if !c.operator.arity_ok(c.children.len()) {
                        diags.push(Diagnostic::new(
                            id,
                            DiagnosticKind::ArityViolation {
                                operator: c.operator,
                                found: c.children.len(),
                            },
                        ));
                    }
                    match (c.operator, c.loop_bound) {
                        (Operator::Loop, None) | (Operator::Loop, Some(0)) => {
                            diags.push(Diagnostic::new(id, DiagnosticKind::MissingLoopBound))
                        }
                        (op, Some(_)) if op != Operator::Loop => {
                            diags.push(Diagnostic::new(id, DiagnosticKind::UnexpectedLoopBound))
                        }
                        _ => {}
                    }
                    if !(c.weight > 0.0 && c.weight.is_finite()) {
                        diags.push(Diagnostic::new(id, DiagnosticKind::NonPositiveWeight));
                    }
                }
            }
        });
        diags
    }
}

/// Names a task model may reference outside itself.
#[derive(Debug, Clone, Default)]
pub struct ValidationScope {
    pub context_ids: BTreeSet<String>,
    /// `(binding key, tier)` pairs.
    pub content_keys: BTreeSet<(String, InterfaceTier)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DiagnosticKind {
    InvalidIdentifier,
    DuplicateId,
    NonPositiveDuration,
    NonPositiveWeight,
    ArityViolation { operator: Operator, found: usize },
    MissingLoopBound,
    UnexpectedLoopBound,
    UnresolvedContextRef(String),
    UnresolvedContentKey(InterfaceTier, String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub node: String,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    fn new(node: &str, kind: DiagnosticKind) -> Self {
        Diagnostic {
            node: node.to_string(),
            kind,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = &self.node;
        match &self.kind {
            DiagnosticKind::InvalidIdentifier => write!(f, "'{node}' is not a valid identifier"),
            DiagnosticKind::DuplicateId => write!(f, "duplicate id '{node}'"),
            DiagnosticKind::NonPositiveDuration => {
                write!(f, "leaf '{node}' needs a positive nominal duration")
            }
            DiagnosticKind::NonPositiveWeight => write!(f, "node '{node}' needs a positive weight"),
            DiagnosticKind::ArityViolation { operator, found } => write!(
                f,
                "{operator} node '{node}' has {found} children, needs {}",
                operator.arity_rule()
            ),
            DiagnosticKind::MissingLoopBound => write!(f, "loop '{node}' needs bound >= 1"),
            DiagnosticKind::UnexpectedLoopBound => {
                write!(f, "node '{node}' is not a loop but declares a bound")
            }
            DiagnosticKind::UnresolvedContextRef(r) => {
                write!(f, "leaf '{node}' references unknown context '{r}'")
            }
            DiagnosticKind::UnresolvedContentKey(tier, key) => {
                write!(f, "leaf '{node}' references unknown {tier} content '{key}'")
            }
        }
    }
}

/// `[a-z][a-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_ab() -> TaskModel {
        TaskModel::new(
            "t",
            TaskNode::composite(
                "root",
                Operator::Seq,
                vec![TaskNode::leaf("a", 30), TaskNode::leaf("b", 40)],
            ),
        )
    }

    #[test]
    fn leaves_in_dfs_order() {
        let m = seq_ab();
        let ids: Vec<_> = m.leaves().iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);

        let m = TaskModel::new(
            "t",
            TaskNode::composite(
                "p",
                Operator::Par,
                vec![
                    TaskNode::composite(
                        "s",
                        Operator::Seq,
                        vec![TaskNode::leaf("a", 1), TaskNode::leaf("b", 1)],
                    ),
                    TaskNode::leaf("c", 1),
                ],
            ),
        );
        let ids: Vec<_> = m.leaves().iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn valid_model_has_no_diagnostics() {
        assert!(seq_ab().validate(&ValidationScope::default()).is_empty());
    }

    #[test]
    fn unresolved_context_ref_is_reported() {
        let mut m = seq_ab();
        if let TaskNode::Composite(c) = &mut m.root {
            if let TaskNode::Leaf(l) = &mut c.children[0] {
                l.context_refs.push("overheat".into());
            }
        }
        let diags = m.validate(&ValidationScope::default());
        assert_eq!(
            diags,
            vec![Diagnostic::new(
                "a",
                DiagnosticKind::UnresolvedContextRef("overheat".into())
            )]
        );

        let mut scope = ValidationScope::default();
        scope.context_ids.insert("overheat".into());
        assert!(m.validate(&scope).is_empty());
    }

    #[test]
    fn programmatic_invariant_breaks_are_caught() {
        let m = TaskModel::new(
            "t",
            TaskNode::composite(
                "c",
                Operator::Choice,
                vec![TaskNode::leaf("a", 0), TaskNode::leaf("a", 3)],
            ),
        );
        let kinds: Vec<_> = m
            .validate(&ValidationScope::default())
            .into_iter()
            .map(|d| d.kind)
            .collect();
        assert!(kinds.contains(&DiagnosticKind::DuplicateId));
        assert!(kinds.contains(&DiagnosticKind::NonPositiveDuration));
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("a"));
        assert!(is_identifier("pump_2"));
        assert!(!is_identifier("2pump"));
        assert!(!is_identifier("Pump"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("a-b"));
    }
}
