//! Probabilistic deterministic finite automata compiled from task models.
//!
//! Every state of a [`Pdfa`] is one configuration of the task tree (which
//! leaves are done, which choice branch was committed, how many loop
//! iterations ran, ...). Transitions are labelled by user [`Action`]s and
//! carry a probability proportional to the weight of the action among those
//! enabled in the source state.
//!
//! Operator semantics:
//!
//! * `seq`: child `i + 1` starts only after child `i` accepts.
//! * `choice`: the first action inside a child commits to that child.
//! * `par`: full interleaving, accepts once every child accepts.
//! * `disable(c1, c2)`: `c1` runs until the first action inside `c2`, which
//!   disables `c1` for good; accepts when `c2` accepts.
//! * `opt(c)`: an explicit Skip is available until the first action in `c`.
//! * `loop(c, k)`: after each run of `c`, either re-enter or ExitLoop; after
//!   `k` runs only ExitLoop remains. At least one run is required.

mod state;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task_model::TaskModel;
use state::{NodeState, Plan};

pub const DEFAULT_STATE_CAP: usize = 100_000;

/// Longest trace [`Pdfa::language`] will enumerate.
pub const MAX_TRACE_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Complete(String),
    Skip(String),
    ExitLoop(String),
    /// Meta-action; never changes the configuration.
    RequestHelp,
}

impl Action {
    /// Id of the node the action acts on.
    pub fn target(&self) -> Option<&str> {
        match self {
            Action::Complete(id) | Action::Skip(id) | Action::ExitLoop(id) => Some(id),
            Action::RequestHelp => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Complete(id) => write!(f, "complete({id})"),
            Action::Skip(id) => write!(f, "skip({id})"),
            Action::ExitLoop(id) => write!(f, "exit({id})"),
            Action::RequestHelp => f.write_str("help"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse action '{0}' (expected complete(id), skip(id), exit(id) or help)")]
pub struct ParseActionError(String);

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "help" {
            return Ok(Action::RequestHelp);
        }
        let err = || ParseActionError(s.to_string());
        let (head, rest) = s.split_once('(').ok_or_else(err)?;
        let id = rest.strip_suffix(')').ok_or_else(err)?.to_string();
        match head {
            "complete" => Ok(Action::Complete(id)),
            "skip" => Ok(Action::Skip(id)),
            "exit" => Ok(Action::ExitLoop(id)),
            _ => Err(err()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub action: Action,
    pub target: StateId,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct State {
    pub accepting: bool,
    /// Sorted by action.
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pdfa {
    name: String,
    states: Vec<State>,
    initial: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("automaton exceeds {cap} states")]
    StateExplosion { cap: usize },
    #[error("state {state} cannot reach completion")]
    DeadEnd { state: StateId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("no such state {0}")]
    InvalidState(StateId),
    #[error("{action} is not enabled in {state}")]
    IllegalAction { state: StateId, action: Action },
}

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub state_cap: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Compiles with the default state cap.
pub fn compile(model: &TaskModel) -> Result<Pdfa, CompileError> {
    compile_with(model, CompileOptions::default())
}

pub fn compile_with(model: &TaskModel, opts: CompileOptions) -> Result<Pdfa, CompileError> {
    let plan = Plan::new(model);
    let root = plan.root();
    let init = plan.init(root);

    let mut ids: HashMap<NodeState, StateId> = HashMap::new();
    let mut configs: Vec<NodeState> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(init.clone(), StateId(0));
    configs.push(init.clone());
    queue.push_back(init);

    let mut states: Vec<State> = Vec::new();
    while let Some(config) = queue.pop_front() {
        let mut enabled = Vec::new();
        plan.enabled(root, &config, &mut enabled);
        enabled.sort_by(|a, b| a.0.cmp(&b.0));
        let total: f64 = enabled.iter().map(|(_, w)| w).sum();

        let mut transitions = Vec::with_capacity(enabled.len());
        for (action, weight) in enabled {
            let next = plan
                .step(root, &config, &action)
                .expect("enabled actions always step");
            let target = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = StateId(configs.len());
                    if id.0 >= opts.state_cap {
                        return Err(CompileError::StateExplosion {
                            cap: opts.state_cap,
                        });
                    }
                    ids.insert(next.clone(), id);
                    configs.push(next.clone());
                    queue.push_back(next);
                    id
                }
            };
            transitions.push(Transition {
                action,
                target,
                probability: weight / total,
            });
        }
        let accepting = plan.accepting(root, &config);
        if !accepting && transitions.is_empty() {
            return Err(CompileError::DeadEnd {
                state: StateId(states.len()),
            });
        }
        states.push(State {
            accepting,
            transitions,
        });
    }

    let pdfa = Pdfa {
        name: model.name.clone(),
        states,
        initial: StateId(0),
    };
    if let Some(state) = pdfa.dead_ends().into_iter().next() {
        return Err(CompileError::DeadEnd { state });
    }
    Ok(pdfa)
}

/// A broken automaton invariant, reported by [`Pdfa::check_well_formed`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbabilityMass { state: StateId, sum: f64 },
    Nondeterministic { state: StateId, action: Action },
    Unreachable { state: StateId },
    DeadEnd { state: StateId },
    AcceptingWithExits { state: StateId },
}

impl Pdfa {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.states.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn accepting_count(&self) -> usize {
        self.states.iter().filter(|s| s.accepting).count()
    }

    fn state(&self, s: StateId) -> Result<&State, StepError> {
        self.states.get(s.0).ok_or(StepError::InvalidState(s))
    }

    pub fn is_accepting(&self, s: StateId) -> Result<bool, StepError> {
        Ok(self.state(s)?.accepting)
    }

    /// Configuration-changing actions enabled in `s`, with probabilities.
    ///
    /// `RequestHelp` is additionally available in every non-accepting state
    /// but is not listed since it carries no probability.
    pub fn enabled(&self, s: StateId) -> Result<Vec<(Action, f64)>, StepError> {
        Ok(self
            .state(s)?
            .transitions
            .iter()
            .map(|t| (t.action.clone(), t.probability))
            .collect())
    }

    pub fn is_enabled(&self, s: StateId, action: &Action) -> Result<bool, StepError> {
        let state = self.state(s)?;
        Ok(match action {
            Action::RequestHelp => !state.accepting,
            a => state.transitions.iter().any(|t| &t.action == a),
        })
    }

    fn transition(&self, s: StateId, action: &Action) -> Result<&Transition, StepError> {
        self.state(s)?
            .transitions
            .iter()
            .find(|t| &t.action == action)
            .ok_or_else(|| StepError::IllegalAction {
                state: s,
                action: action.clone(),
            })
    }

    /// The unique successor of `s` under `action`. `RequestHelp` loops back
    /// to `s` in non-accepting states.
    pub fn step(&self, s: StateId, action: &Action) -> Result<StateId, StepError> {
        if *action == Action::RequestHelp {
            return if self.state(s)?.accepting {
                Err(StepError::IllegalAction {
                    state: s,
                    action: Action::RequestHelp,
                })
            } else {
                Ok(s)
            };
        }
        Ok(self.transition(s, action)?.target)
    }

    pub fn probability(&self, s: StateId, action: &Action) -> Result<f64, StepError> {
        Ok(self.transition(s, action)?.probability)
    }

    /// `-log2 p(action | s)` in bits.
    pub fn surprisal(&self, s: StateId, action: &Action) -> Result<f64, StepError> {
        let p = self.probability(s, action)?;
        Ok(if p >= 1.0 { 0.0 } else { -p.log2() })
    }

    /// All accepted action sequences of length at most `max_len`.
    ///
    /// # Panics
    ///
    /// If `max_len > MAX_TRACE_LEN`.
    pub fn language(&self, max_len: usize) -> BTreeSet<Vec<Action>> {
        let mut out = BTreeSet::new();
        self.for_each_trace(max_len, |t| {
            out.insert(t.to_vec());
        });
        out
    }

    /// Calls `f` once per accepted trace of at most `max_len` actions, without
    /// collecting them. Each trace is reported once.
    pub fn for_each_trace(&self, max_len: usize, mut f: impl FnMut(&[Action])) {
        assert!(
            max_len <= MAX_TRACE_LEN,
            "language enumeration is limited to traces of {MAX_TRACE_LEN} actions"
        );
        let mut trace = Vec::new();
        self.walk_traces(self.initial, max_len, &mut trace, &mut f);
    }

    fn walk_traces(
        &self,
        s: StateId,
        budget: usize,
        trace: &mut Vec<Action>,
        f: &mut impl FnMut(&[Action]),
    ) {
        let state = &self.states[s.0];
        if state.accepting {
            f(trace);
        }
        if budget == 0 {
            return;
        }
        for t in &state.transitions {
            trace.push(t.action.clone());
            self.walk_traces(t.target, budget - 1, trace, f);
            trace.pop();
        }
    }

    /// Leaves that can still be completed from `s`, including those enabled now.
    pub fn reachable_leaves(&self, s: StateId) -> Result<BTreeSet<String>, StepError> {
        self.state(s)?;
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![s];
        let mut leaves = BTreeSet::new();
        seen[s.0] = true;
        while let Some(cur) = stack.pop() {
            for t in &self.states[cur.0].transitions {
                if let Action::Complete(id) = &t.action {
                    leaves.insert(id.clone());
                }
                if !seen[t.target.0] {
                    seen[t.target.0] = true;
                    stack.push(t.target);
                }
            }
        }
        Ok(leaves)
    }

    fn dead_ends(&self) -> Vec<StateId> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for (i, s) in self.states.iter().enumerate() {
            for t in &s.transitions {
                preds[t.target.0].push(i);
            }
        }
        let mut live = vec![false; self.states.len()];
        let mut stack: Vec<usize> = (0..self.states.len())
            .filter(|&i| self.states[i].accepting)
            .collect();
        for &i in &stack {
            live[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &p in &preds[i] {
                if !live[p] {
                    live[p] = true;
                    stack.push(p);
                }
            }
        }
        (0..self.states.len())
            .filter(|&i| !live[i])
            .map(StateId)
            .collect()
    }

    /// Exhaustively checks probability mass, determinism, reachability and
    /// absence of dead ends.
    pub fn check_well_formed(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            let id = StateId(i);
            let mut seen = BTreeSet::new();
            for t in &s.transitions {
                if !seen.insert(&t.action) {
                    violations.push(Violation::Nondeterministic {
                        state: id,
                        action: t.action.clone(),
                    });
                }
            }
            if s.accepting {
                if !s.transitions.is_empty() {
                    violations.push(Violation::AcceptingWithExits { state: id });
                }
            } else {
                let sum: f64 = s.transitions.iter().map(|t| t.probability).sum();
                if (sum - 1.0).abs() > 1e-9 {
                    violations.push(Violation::ProbabilityMass { state: id, sum });
                }
            }
        }
        let mut reached = vec![false; self.states.len()];
        let mut stack = vec![self.initial.0];
        reached[self.initial.0] = true;
        while let Some(i) = stack.pop() {
            for t in &self.states[i].transitions {
                if !reached[t.target.0] {
                    reached[t.target.0] = true;
                    stack.push(t.target.0);
                }
            }
        }
        for (i, r) in reached.iter().enumerate() {
            if !r {
                violations.push(Violation::Unreachable { state: StateId(i) });
            }
        }
        for state in self.dead_ends() {
            violations.push(Violation::DeadEnd { state });
        }
        violations
    }

    /// Graphviz rendering with stable node and edge order.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {:?} {{", self.name);
        out.push_str("  rankdir=LR;\n");
        out.push_str("  node [shape=circle];\n");
        for (i, s) in self.states.iter().enumerate() {
            if s.accepting {
                let _ = writeln!(out, "  s{i} [shape=doublecircle];");
            }
        }
        let _ = writeln!(out, "  start [shape=point];");
        let _ = writeln!(out, "  start -> {};", self.initial);
        for (i, s) in self.states.iter().enumerate() {
            for t in &s.transitions {
                let _ = writeln!(
                    out,
                    "  s{i} -> {} [label=\"{} {:.4}\"];",
                    t.target, t.action, t.probability
                );
            }
        }
        out.push_str("}\n");
        out
    }
}
