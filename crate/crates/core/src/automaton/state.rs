use std::collections::HashMap;

use super::Action;
use crate::task_model::{Operator, TaskModel, TaskNode};

/// Task tree flattened into a pre-order arena.
pub(super) struct Plan {
    nodes: Vec<PlanNode>,
    by_id: HashMap<String, usize>,
}

struct PlanNode {
    id: String,
    /// `None` for leaves.
    operator: Option<Operator>,
    children: Vec<usize>,
    weight: f64,
    bound: u32,
    /// One past the last descendant in pre-order.
    end: usize,
}

/// Configuration of one subtree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(super) enum NodeState {
    Leaf {
        done: bool,
    },
    Seq {
        current: usize,
        child: Box<NodeState>,
    },
    Choice(Option<(usize, Box<NodeState>)>),
    Par(Vec<NodeState>),
    /// `child` belongs to the first operand until `disabled`, then to the second.
    Disable {
        disabled: bool,
        child: Box<NodeState>,
    },
    Opt(OptState),
    Loop {
        runs: u32,
        exited: bool,
        child: Box<NodeState>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(super) enum OptState {
    Untouched,
    Skipped,
    Entered(Box<NodeState>),
}

impl Plan {
    pub(super) fn new(model: &TaskModel) -> Plan {
        let mut plan = Plan {
            nodes: Vec::new(),
            by_id: HashMap::new(),
        };
        plan.add(&model.root);
        plan
    }

    fn add(&mut self, node: &TaskNode) -> usize {
        let idx = self.nodes.len();
        let (operator, weight, bound) = match node {
            TaskNode::Leaf(l) => (None, l.weight, 0),
            TaskNode::Composite(c) => (Some(c.operator), c.weight, c.loop_bound.unwrap_or(0)),
        };
        self.nodes.push(PlanNode {
            id: node.id().to_string(),
            operator,
            children: Vec::new(),
            weight,
            bound,
            end: idx + 1,
        });
        self.by_id.insert(node.id().to_string(), idx);
        if let TaskNode::Composite(c) = node {
            let children: Vec<usize> = c.children.iter().map(|ch| self.add(ch)).collect();
            self.nodes[idx].children = children;
        }
        self.nodes[idx].end = self.nodes.len();
        idx
    }

    pub(super) fn root(&self) -> usize {
        0
    }

    fn contains(&self, node: usize, target: usize) -> bool {
        node <= target && target < self.nodes[node].end
    }

    /// Index among `node`'s children of the child whose subtree holds `target`.
    fn child_towards(&self, node: usize, target: usize) -> Option<usize> {
        self.nodes[node]
            .children
            .iter()
            .position(|&c| self.contains(c, target))
    }

    pub(super) fn init(&self, node: usize) -> NodeState {
        let n = &self.nodes[node];
        match n.operator {
            None => NodeState::Leaf { done: false },
            Some(Operator::Seq) => NodeState::Seq {
                current: 0,
                child: Box::new(self.init(n.children[0])),
            },
            Some(Operator::Choice) => NodeState::Choice(None),
            Some(Operator::Par) => {
                NodeState::Par(n.children.iter().map(|&c| self.init(c)).collect())
            }
            Some(Operator::Disable) => NodeState::Disable {
                disabled: false,
                child: Box::new(self.init(n.children[0])),
            },
            Some(Operator::Opt) => NodeState::Opt(OptState::Untouched),
            Some(Operator::Loop) => NodeState::Loop {
                runs: 0,
                exited: false,
                child: Box::new(self.init(n.children[0])),
            },
        }
    }

    pub(super) fn accepting(&self, node: usize, s: &NodeState) -> bool {
        let n = &self.nodes[node];
        match s {
            NodeState::Leaf { done } => *done,
            NodeState::Seq { current, child } => {
                *current == n.children.len() - 1 && self.accepting(n.children[*current], child)
            }
            NodeState::Choice(None) => false,
            NodeState::Choice(Some((i, child))) => self.accepting(n.children[*i], child),
            NodeState::Par(children) => children
                .iter()
                .zip(&n.children)
                .all(|(s, &c)| self.accepting(c, s)),
            NodeState::Disable { disabled, child } => {
                *disabled && self.accepting(n.children[1], child)
            }
            NodeState::Opt(OptState::Untouched) => false,
            NodeState::Opt(OptState::Skipped) => true,
            NodeState::Opt(OptState::Entered(child)) => self.accepting(n.children[0], child),
            NodeState::Loop { exited, .. } => *exited,
        }
    }

    pub(super) fn enabled(&self, node: usize, s: &NodeState, out: &mut Vec<(Action, f64)>) {
        let n = &self.nodes[node];
        match s {
            NodeState::Leaf { done: false } => out.push((Action::Complete(n.id.clone()), n.weight)),
            NodeState::Leaf { done: true } => {}
            NodeState::Seq { current, child } => self.enabled(n.children[*current], child, out),
            NodeState::Choice(None) => {
                for &c in &n.children {
                    self.enabled(c, &self.init(c), out);
                }
            }
            NodeState::Choice(Some((i, child))) => self.enabled(n.children[*i], child, out),
            NodeState::Par(children) => {
                for (s, &c) in children.iter().zip(&n.children) {
                    self.enabled(c, s, out);
                }
            }
            NodeState::Disable {
                disabled: false,
                child,
            } => {
                self.enabled(n.children[0], child, out);
                self.enabled(n.children[1], &self.init(n.children[1]), out);
            }
            NodeState::Disable {
                disabled: true,
                child,
            } => self.enabled(n.children[1], child, out),
            NodeState::Opt(OptState::Untouched) => {
                let c = n.children[0];
                self.enabled(c, &self.init(c), out);
                out.push((Action::Skip(n.id.clone()), n.weight));
            }
            NodeState::Opt(OptState::Skipped) => {}
            NodeState::Opt(OptState::Entered(child)) => self.enabled(n.children[0], child, out),
            NodeState::Loop { exited: true, .. } => {}
            NodeState::Loop {
                runs,
                exited: false,
                child,
            } => {
                let c = n.children[0];
                if **child == self.init(c) {
                    if *runs < n.bound {
                        self.enabled(c, child, out);
                    }
                    if *runs >= 1 {
                        out.push((Action::ExitLoop(n.id.clone()), n.weight));
                    }
                } else {
                    self.enabled(c, child, out);
                }
            }
        }
    }

    /// Successor configuration, or `None` if `action` is not enabled.
    pub(super) fn step(&self, node: usize, s: &NodeState, action: &Action) -> Option<NodeState> {
        let target = *self.by_id.get(action.target()?)?;
        self.step_towards(node, s, action, target)
    }

    fn step_towards(
        &self,
        node: usize,
        s: &NodeState,
        action: &Action,
        target: usize,
    ) -> Option<NodeState> {
        let n = &self.nodes[node];
        if target == node {
            return match (s, action) {
                (NodeState::Leaf { done: false }, Action::Complete(_)) => {
                    Some(NodeState::Leaf { done: true })
                }
                (NodeState::Opt(OptState::Untouched), Action::Skip(_)) => {
                    Some(NodeState::Opt(OptState::Skipped))
                }
                (
                    NodeState::Loop {
                        runs,
                        exited: false,
                        child,
                    },
                    Action::ExitLoop(_),
                ) if *runs >= 1 && **child == self.init(n.children[0]) => Some(NodeState::Loop {
                    runs: *runs,
                    exited: true,
                    child: child.clone(),
                }),
                _ => None,
            };
        }
        let i = self.child_towards(node, target)?;
        let c = n.children[i];
        match s {
            NodeState::Leaf { .. } => None,
            NodeState::Seq { current, child } => {
                if i != *current {
                    return None;
                }
                let next = self.step_towards(c, child, action, target)?;
                if self.accepting(c, &next) && i + 1 < n.children.len() {
                    Some(NodeState::Seq {
                        current: i + 1,
                        child: Box::new(self.init(n.children[i + 1])),
                    })
                } else {
                    Some(NodeState::Seq {
                        current: i,
                        child: Box::new(next),
                    })
                }
            }
            NodeState::Choice(None) => {
                let next = self.step_towards(c, &self.init(c), action, target)?;
                Some(NodeState::Choice(Some((i, Box::new(next)))))
            }
            NodeState::Choice(Some((j, child))) => {
                if i != *j {
                    return None;
                }
                let next = self.step_towards(c, child, action, target)?;
                Some(NodeState::Choice(Some((i, Box::new(next)))))
            }
            NodeState::Par(children) => {
                let next = self.step_towards(c, &children[i], action, target)?;
                let mut children = children.clone();
                children[i] = next;
                Some(NodeState::Par(children))
            }
            NodeState::Disable { disabled, child } => match (*disabled, i) {
                (false, 0) => Some(NodeState::Disable {
                    disabled: false,
                    child: Box::new(self.step_towards(c, child, action, target)?),
                }),
                (false, _) => Some(NodeState::Disable {
                    disabled: true,
                    child: Box::new(self.step_towards(c, &self.init(c), action, target)?),
                }),
                (true, 1) => Some(NodeState::Disable {
                    disabled: true,
                    child: Box::new(self.step_towards(c, child, action, target)?),
                }),
                (true, _) => None,
            },
            NodeState::Opt(OptState::Skipped) => None,
            NodeState::Opt(OptState::Untouched) => Some(NodeState::Opt(OptState::Entered(
                Box::new(self.step_towards(c, &self.init(c), action, target)?),
            ))),
            NodeState::Opt(OptState::Entered(child)) => Some(NodeState::Opt(OptState::Entered(
                Box::new(self.step_towards(c, child, action, target)?),
            ))),
            NodeState::Loop { exited: true, .. } => None,
            NodeState::Loop {
                runs,
                exited: false,
                child,
            } => {
                if *runs >= n.bound && **child == self.init(c) {
                    return None;
                }
                let next = self.step_towards(c, child, action, target)?;
                if self.accepting(c, &next) {
                    Some(NodeState::Loop {
                        runs: runs + 1,
                        exited: false,
                        child: Box::new(self.init(c)),
                    })
                } else {
                    Some(NodeState::Loop {
                        runs: *runs,
                        exited: false,
                        child: Box::new(next),
                    })
                }
            }
        }
    }
}
