//! Random task trees and a brute-force trace enumerator over them.

use std::collections::{BTreeMap, BTreeSet};

use emaint::automaton::{Action, Pdfa};
use emaint::task_model::{CompositeTask, LeafTask, Operator, TaskModel, TaskNode};
use emaint::user_model::{InterfaceTier, UserModelConfig, LEVELS};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct LeafAttrs {
    pub nominal: u32,
    pub weight: f64,
    pub description: String,
    pub contexts: Vec<String>,
    pub content: BTreeMap<InterfaceTier, String>,
}

/// Tree shape before ids are assigned.
#[derive(Debug, Clone)]
pub enum Shape {
    Leaf(LeafAttrs),
    Node {
        op: Operator,
        children: Vec<Shape>,
        bound: Option<u32>,
        weight: f64,
    },
}

impl Shape {
    pub fn leaves(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Node { children, .. } => children.iter().map(Shape::leaves).sum(),
        }
    }

    /// Edges from this node to its deepest leaf.
    pub fn depth(&self) -> usize {
        match self {
            Shape::Leaf(_) => 0,
            Shape::Node { children, .. } => {
                1 + children.iter().map(Shape::depth).max().unwrap_or(0)
            }
        }
    }

    /// Leaves get `l0, l1, ...` and composites `n0, n1, ...` in pre-order.
    pub fn build(&self, name: &str) -> TaskModel {
        let (mut leaves, mut nodes) = (0, 0);
        TaskModel::new(name, self.node(&mut leaves, &mut nodes))
    }

    fn node(&self, leaves: &mut usize, nodes: &mut usize) -> TaskNode {
        match self {
            Shape::Leaf(a) => {
                let id = format!("l{leaves}");
                *leaves += 1;
                TaskNode::Leaf(LeafTask {
                    id,
                    description: a.description.clone(),
                    nominal_duration: a.nominal,
                    weight: a.weight,
                    context_refs: a.contexts.clone(),
                    content_keys: a.content.clone(),
                })
            }
            Shape::Node {
                op,
                children,
                bound,
                weight,
            } => {
                let id = format!("n{nodes}");
                *nodes += 1;
                TaskNode::Composite(CompositeTask {
                    id,
                    operator: *op,
                    children: children.iter().map(|c| c.node(leaves, nodes)).collect(),
                    loop_bound: *bound,
                    weight: *weight,
                })
            }
        }
    }
}

pub fn normalized(raw: Vec<f64>) -> [f64; LEVELS] {
    let z: f64 = raw.iter().sum();
    [raw[0] / z, raw[1] / z, raw[2] / z, raw[3] / z]
}

fn row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

/// Valid configurations with every probability strictly inside (0, 1).
pub fn config() -> impl Strategy<Value = UserModelConfig> {
    (
        row(4),
        prop::collection::vec(row(4), 4),
        prop::collection::vec(0.01f64..0.99, 4),
        prop::collection::vec(row(3), 4),
    )
        .prop_map(|(prior, trans, help, time)| {
            let mut cfg = UserModelConfig {
                prior: normalized(prior),
                ..UserModelConfig::default()
            };
            for (i, r) in trans.into_iter().enumerate() {
                cfg.transition[i] = normalized(r);
            }
            cfg.p_help = [help[0], help[1], help[2], help[3]];
            for (i, r) in time.into_iter().enumerate() {
                let z: f64 = r.iter().sum();
                cfg.time_emission[i] = [r[0] / z, r[1] / z, r[2] / z];
            }
            cfg
        })
}

pub fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => prop::sample::select(vec![0.5, 1.0, 2.0, 3.0]),
        1 => 0.01f64..100.0,
    ]
}

fn tier() -> impl Strategy<Value = InterfaceTier> {
    prop::sample::select(InterfaceTier::ALL.to_vec())
}

pub fn leaf_attrs() -> impl Strategy<Value = LeafAttrs> {
    (
        1u32..=900,
        weight(),
        "\\PC{0,12}",
        prop::sample::subsequence(vec!["hot", "noisy", "wet_floor"], 0..=2),
        prop::collection::btree_map(tier(), "[a-z0-9 ./_\"\\\\-]{1,10}", 0..=2),
    )
        .prop_map(
            |(nominal, weight, description, contexts, content)| LeafAttrs {
                nominal,
                weight,
                description,
                contexts: contexts.into_iter().map(String::from).collect(),
                content,
            },
        )
}

/// Trees of at most `max_leaves` leaves and depth at most `max_depth`.
/// Loop bounds are 1 or 2.
pub fn shape(max_leaves: usize, max_depth: u32) -> impl Strategy<Value = Shape> {
    leaf_attrs()
        .prop_map(Shape::Leaf)
        .prop_recursive(max_depth, 64, 2, |inner| {
            prop_oneof![
                3 => (
                    prop::sample::select(vec![Operator::Seq, Operator::Choice, Operator::Par]),
                    prop::collection::vec(inner.clone(), 2..=3),
                    weight(),
                )
                    .prop_map(|(op, children, weight)| Shape::Node {
                        op,
                        children,
                        bound: None,
                        weight,
                    }),
                1 => (inner.clone(), inner.clone(), weight()).prop_map(|(a, b, weight)| Shape::Node {
                    op: Operator::Disable,
                    children: vec![a, b],
                    bound: None,
                    weight,
                }),
                1 => (inner.clone(), weight()).prop_map(|(c, weight)| Shape::Node {
                    op: Operator::Opt,
                    children: vec![c],
                    bound: None,
                    weight,
                }),
                1 => (inner, 1u32..=2, weight()).prop_map(|(c, k, weight)| Shape::Node {
                    op: Operator::Loop,
                    children: vec![c],
                    bound: Some(k),
                    weight,
                }),
            ]
        })
        .prop_filter("leaf budget", move |s| s.leaves() <= max_leaves)
}

pub fn model(max_leaves: usize, max_depth: u32) -> impl Strategy<Value = TaskModel> {
    (shape(max_leaves, max_depth), "\\PC{0,10}").prop_map(|(s, name)| s.build(&name))
}

/// Actions as bytes; codes follow `Action`'s ordering so byte traces sort
/// the same way as action traces.
pub type Trace = Vec<u8>;

pub struct Alphabet(Vec<Action>);

impl Alphabet {
    pub fn of(node: &TaskNode) -> Alphabet {
        fn walk(n: &TaskNode, out: &mut Vec<Action>) {
            match n {
                TaskNode::Leaf(l) => out.push(Action::Complete(l.id.clone())),
                TaskNode::Composite(c) => {
                    match c.operator {
                        Operator::Opt => out.push(Action::Skip(c.id.clone())),
                        Operator::Loop => out.push(Action::ExitLoop(c.id.clone())),
                        _ => {}
                    }
                    c.children.iter().for_each(|k| walk(k, out));
                }
            }
        }
        let mut actions = Vec::new();
        walk(node, &mut actions);
        actions.sort();
        assert!(actions.len() <= 256);
        Alphabet(actions)
    }

    fn code(&self, a: &Action) -> Option<u8> {
        self.0.binary_search(a).ok().map(|i| i as u8)
    }

    fn sym(&self, a: &Action) -> u8 {
        self.code(a).expect("action in alphabet")
    }

    pub fn decode(&self, t: &[u8]) -> Vec<Action> {
        t.iter().map(|&c| self.0[c as usize].clone()).collect()
    }

    /// The automaton's language up to `n`, coded as it is enumerated so large
    /// languages stay small in memory.
    pub fn language(&self, pdfa: &Pdfa, n: usize) -> Result<BTreeSet<Trace>, String> {
        let mut out = BTreeSet::new();
        let mut stray = None;
        pdfa.for_each_trace(n, |t| {
            match t.iter().map(|a| self.code(a)).collect::<Option<Trace>>() {
                Some(c) => {
                    out.insert(c);
                }
                None => {
                    stray.get_or_insert_with(|| t.to_vec());
                }
            }
        });
        match stray {
            Some(t) => Err(format!(
                "automaton trace {t:?} uses an action outside the tree"
            )),
            None => Ok(out),
        }
    }

    /// First difference between the automaton language up to `n` and an
    /// oracle set, if any.
    pub fn diff(&self, pdfa: &Pdfa, n: usize, want: &BTreeSet<Trace>) -> Option<String> {
        let got = match self.language(pdfa, n) {
            Ok(got) => got,
            Err(e) => return Some(e),
        };
        let mut g = got.iter();
        let mut w = want.iter();
        loop {
            match (g.next(), w.next()) {
                (None, None) => return None,
                (Some(x), Some(y)) if x == y => continue,
                (x, y) => {
                    return Some(format!(
                        "automaton {:?} vs oracle {:?} ({} vs {} traces)",
                        x.map(|x| self.decode(x)),
                        y.map(|y| self.decode(y)),
                        got.len(),
                        want.len()
                    ))
                }
            }
        }
    }
}

/// Every complete action sequence of `node` no longer than `cap`, straight
/// from the operator definitions.
pub fn traces(node: &TaskNode, cap: usize) -> BTreeSet<Trace> {
    coded(node, cap, &Alphabet::of(node))
}

fn coded(node: &TaskNode, cap: usize, abc: &Alphabet) -> BTreeSet<Trace> {
    match node {
        TaskNode::Leaf(l) => BTreeSet::from([vec![abc.sym(&Action::Complete(l.id.clone()))]]),
        TaskNode::Composite(c) => {
            let kids: Vec<BTreeSet<Trace>> =
                c.children.iter().map(|k| coded(k, cap, abc)).collect();
            let out = match c.operator {
                Operator::Seq => kids.into_iter().reduce(|a, b| concat(&a, &b, cap)).unwrap(),
                Operator::Choice => kids.into_iter().flatten().collect(),
                Operator::Par => kids
                    .into_iter()
                    .reduce(|a, b| shuffle_sets(&a, &b, cap))
                    .unwrap(),
                Operator::Opt => {
                    let mut out = kids[0].clone();
                    out.insert(vec![abc.sym(&Action::Skip(c.id.clone()))]);
                    out
                }
                Operator::Loop => {
                    let exit = BTreeSet::from([vec![abc.sym(&Action::ExitLoop(c.id.clone()))]]);
                    let mut out = BTreeSet::new();
                    let mut runs = kids[0].clone();
                    for j in 1..=c.loop_bound.unwrap_or(1) {
                        if j > 1 {
                            runs = concat(&runs, &kids[0], cap);
                        }
                        out.extend(concat(&runs, &exit, cap));
                    }
                    out
                }
                Operator::Disable => concat(&prefixes(&c.children[0], cap, abc), &kids[1], cap),
            };
            out.into_iter().filter(|t| t.len() <= cap).collect()
        }
    }
}

/// Every prefix, up to `cap` long, of a complete trace of `node`. Built
/// from the children's prefixes, since pruning full traces at `cap` would
/// lose short prefixes of long ones.
fn prefixes(node: &TaskNode, cap: usize, abc: &Alphabet) -> BTreeSet<Trace> {
    let empty = || BTreeSet::from([Vec::new()]);
    match node {
        TaskNode::Leaf(l) => {
            BTreeSet::from([vec![], vec![abc.sym(&Action::Complete(l.id.clone()))]])
        }
        TaskNode::Composite(c) => {
            let pre: Vec<BTreeSet<Trace>> =
                c.children.iter().map(|k| prefixes(k, cap, abc)).collect();
            let full: Vec<BTreeSet<Trace>> =
                c.children.iter().map(|k| coded(k, cap, abc)).collect();
            match c.operator {
                Operator::Seq => {
                    // some children done, then a prefix of the next one
                    let mut out = BTreeSet::new();
                    let mut done = empty();
                    for (p, f) in pre.iter().zip(&full) {
                        out.extend(concat(&done, p, cap));
                        done = concat(&done, f, cap);
                    }
                    out
                }
                Operator::Choice => pre.into_iter().flatten().collect(),
                Operator::Par => pre
                    .into_iter()
                    .reduce(|a, b| shuffle_sets(&a, &b, cap))
                    .unwrap(),
                Operator::Opt => {
                    let mut out = pre[0].clone();
                    out.insert(vec![abc.sym(&Action::Skip(c.id.clone()))]);
                    out
                }
                Operator::Loop => {
                    let exit = BTreeSet::from([vec![abc.sym(&Action::ExitLoop(c.id.clone()))]]);
                    let mut out = BTreeSet::new();
                    let mut runs = empty();
                    for _ in 0..c.loop_bound.unwrap_or(1) {
                        out.extend(concat(&runs, &pre[0], cap));
                        runs = concat(&runs, &full[0], cap);
                        out.extend(concat(&runs, &exit, cap));
                    }
                    out
                }
                Operator::Disable => concat(&pre[0], &pre[1], cap),
            }
        }
    }
}

fn concat(a: &BTreeSet<Trace>, b: &BTreeSet<Trace>, cap: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    for x in a {
        for y in b {
            if x.len() + y.len() <= cap {
                let mut t = x.clone();
                t.extend_from_slice(y);
                out.insert(t);
            }
        }
    }
    out
}

fn shuffle_sets(a: &BTreeSet<Trace>, b: &BTreeSet<Trace>, cap: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    for x in a {
        for y in b {
            if x.len() + y.len() <= cap {
                shuffle(x, y, &mut Vec::new(), &mut out);
            }
        }
    }
    out
}

fn shuffle(x: &[u8], y: &[u8], acc: &mut Trace, out: &mut BTreeSet<Trace>) {
    if x.is_empty() && y.is_empty() {
        out.insert(acc.clone());
        return;
    }
    if let Some((&h, rest)) = x.split_first() {
        acc.push(h);
        shuffle(rest, y, acc, out);
        acc.pop();
    }
    if let Some((&h, rest)) = y.split_first() {
        acc.push(h);
        shuffle(x, rest, acc, out);
        acc.pop();
    }
}

/// Leaf count plus one per Skip and ExitLoop action the tree can take.
pub fn comparison_len(node: &TaskNode) -> usize {
    match node {
        TaskNode::Leaf(_) => 1,
        TaskNode::Composite(c) => {
            let own = matches!(c.operator, Operator::Opt | Operator::Loop) as usize;
            own + c.children.iter().map(comparison_len).sum::<usize>()
        }
    }
}
