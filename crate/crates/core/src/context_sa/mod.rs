//! Situation awareness: context rules evaluated against live signals, and the
//! team feed that keeps members aware of each other's progress.

mod predicate;
mod team;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;

pub use predicate::{CmpOp, Comparison, Operand, ParsePredicateError, Predicate};
pub use team::{
    notify_unblocked, DependencyMap, Dependent, LeafRef, MemberDetail, MemberStatus, MemberView,
    TeamError, TeamEvent, TeamEventKind, TeamFeed, TeamView, DEFAULT_DETAIL_EVENTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Danger,
}

impl Severity {
    pub fn keyword(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Danger => "danger",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.keyword())
    }
}

/// A modelled abnormality or risk situation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRule {
    pub id: String,
    /// Leaves the rule applies to; empty means every step.
    pub scope: BTreeSet<String>,
    pub predicate: Predicate,
    pub severity: Severity,
    pub message: String,
}

impl ContextRule {
    pub fn applies_to(&self, leaf: Option<&str>) -> bool {
        self.scope.is_empty() || leaf.is_some_and(|l| self.scope.contains(l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub leaf_id: Option<String>,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalValue {
    pub value: f64,
    pub at: Timestamp,
}

/// Latest known value per signal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalFrame(pub BTreeMap<String, SignalValue>);

#[derive(Debug, Clone, PartialEq, Error)]
#[error("signal '{signal}' went back in time ({new} < {previous})")]
pub struct OutOfOrderSignal {
    pub signal: String,
    pub previous: Timestamp,
    pub new: Timestamp,
}

impl SignalFrame {
    pub fn new() -> Self {
        SignalFrame::default()
    }

    pub fn with(mut self, name: &str, value: f64, at: Timestamp) -> Self {
        self.0.insert(name.to_string(), SignalValue { value, at });
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).map(|v| v.value)
    }

    /// Overlays `newer` on this frame; per-signal timestamps must not decrease.
    pub fn merge(&mut self, newer: &SignalFrame) -> Result<(), OutOfOrderSignal> {
        for (name, v) in &newer.0 {
            if let Some(prev) = self.0.get(name) {
                if v.at < prev.at {
                    return Err(OutOfOrderSignal {
                        signal: name.clone(),
                        previous: prev.at,
                        new: v.at,
                    });
                }
            }
        }
        for (name, v) in &newer.0 {
            self.0.insert(name.clone(), *v);
        }
        Ok(())
    }
}

/// Inputs for one round of context evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub current_leaf: Option<&'a str>,
    pub frame: &'a SignalFrame,
    /// Seconds since the current step was shown.
    pub elapsed: f64,
    /// Bits of the most recent transition.
    pub surprisal: f64,
    pub now: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("rule '{rule}' reads signal '{signal}' which is not in the frame")]
    UnknownSignal { rule: String, signal: String },
}

fn alert_for(rule: &ContextRule, input: &EvalInput<'_>) -> Alert {
    Alert {
        rule_id: rule.id.clone(),
        severity: rule.severity,
        message: rule.message.clone(),
        leaf_id: input.current_leaf.map(str::to_string),
        timestamp: input.now,
    }
}

/// One alert per in-scope rule whose predicate holds, ordered by rule id.
///
/// A rule reading a signal missing from the frame is an error rather than a
/// silent miss.
pub fn evaluate_contexts(
    rules: &[ContextRule],
    input: &EvalInput<'_>,
) -> Result<Vec<Alert>, ContextError> {
    let mut alerts = Vec::new();
    for rule in sorted(rules) {
        if !rule.applies_to(input.current_leaf) {
            continue;
        }
        let holds = rule
            .predicate
            .holds(input.frame, input.elapsed, input.surprisal)
            .map_err(|signal| ContextError::UnknownSignal {
                rule: rule.id.clone(),
                signal,
            })?;
        if holds {
            alerts.push(alert_for(rule, input));
        }
    }
    Ok(alerts)
}

/// Like [`evaluate_contexts`], but rules waiting on a signal that has not
/// arrived yet are returned separately instead of failing the round.
pub fn evaluate_available(
    rules: &[ContextRule],
    input: &EvalInput<'_>,
) -> (Vec<Alert>, Vec<ContextError>) {
    let mut alerts = Vec::new();
    let mut pending = Vec::new();
    for rule in sorted(rules) {
        if !rule.applies_to(input.current_leaf) {
            continue;
        }
        match rule
            .predicate
            .holds(input.frame, input.elapsed, input.surprisal)
        {
            Ok(true) => alerts.push(alert_for(rule, input)),
            Ok(false) => {}
            Err(signal) => pending.push(ContextError::UnknownSignal {
                rule: rule.id.clone(),
                signal,
            }),
        }
    }
    (alerts, pending)
}

fn sorted(rules: &[ContextRule]) -> Vec<&ContextRule> {
    let mut v: Vec<_> = rules.iter().collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Team situation-awareness breakdown levels, used to tag events and report
/// entries for later analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsaLevel {
    /// Information not transmitted to the team or member.
    NotTransmitted,
    /// Information comprehended differently by different people or teams.
    Miscomprehended,
    /// Implications for future events not understood across the team.
    ImplicationsMissed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaBreakdownTag {
    pub level: TsaLevel,
    pub note: String,
}
