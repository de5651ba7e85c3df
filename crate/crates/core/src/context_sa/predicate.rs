use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::SignalFrame;
use crate::task_model::is_identifier;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Signal(String),
    /// Seconds on the current step.
    Elapsed,
    /// Bits of the last transition.
    Surprisal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub operand: Operand,
    pub op: CmpOp,
    pub value: f64,
}

/// Conjunction of comparisons, e.g. `elapsed > 300 and temp > 60`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate(pub Vec<Comparison>);

impl Predicate {
    /// Named signals read by the predicate.
    pub fn signals(&self) -> impl Iterator<Item = &str> {
        self.0.iter().filter_map(|c| match &c.operand {
            Operand::Signal(s) => Some(s.as_str()),
            _ => None,
        })
    }

    /// `Err(signal)` if a referenced signal is absent from `frame`.
    pub fn holds(&self, frame: &SignalFrame, elapsed: f64, surprisal: f64) -> Result<bool, String> {
        let mut all = true;
        for c in &self.0 {
            let lhs = match &c.operand {
                Operand::Signal(s) => frame.get(s).ok_or_else(|| s.clone())?,
                Operand::Elapsed => elapsed,
                Operand::Surprisal => surprisal,
            };
            all &= c.op.apply(lhs, c.value);
        }
        Ok(all)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad predicate '{text}': {reason}")]
pub struct ParsePredicateError {
    pub text: String,
    pub reason: String,
}

impl FromStr for Predicate {
    type Err = ParsePredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| ParsePredicateError {
            text: s.to_string(),
            reason,
        };
        let mut comparisons = Vec::new();
        for clause in s.split(" and ") {
            let clause = clause.trim();
            let op_start = clause
                .find(['>', '<', '=', '!'])
                .ok_or_else(|| fail(format!("no comparison operator in '{clause}'")))?;
            let name = clause[..op_start].trim();
            let rest = &clause[op_start..];
            let (op, rest) = [
                (">=", CmpOp::Ge),
                ("<=", CmpOp::Le),
                ("==", CmpOp::Eq),
                ("!=", CmpOp::Ne),
                (">", CmpOp::Gt),
                ("<", CmpOp::Lt),
            ]
            .into_iter()
            .find_map(|(sym, op)| rest.strip_prefix(sym).map(|r| (op, r)))
            .ok_or_else(|| fail(format!("unknown operator in '{clause}'")))?;
            let value: f64 = rest
                .trim()
                .parse()
                .map_err(|_| fail(format!("'{}' is not a number", rest.trim())))?;
            if !value.is_finite() {
                return Err(fail("threshold must be finite".into()));
            }
            let operand = match name {
                "elapsed" => Operand::Elapsed,
                "surprisal" => Operand::Surprisal,
                n if is_identifier(n) => Operand::Signal(n.to_string()),
                n => return Err(fail(format!("'{n}' is not a signal name"))),
            };
            comparisons.push(Comparison { operand, op, value });
        }
        Ok(Predicate(comparisons))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            let name = match &c.operand {
                Operand::Signal(s) => s.as_str(),
                Operand::Elapsed => "elapsed",
                Operand::Surprisal => "surprisal",
            };
            write!(f, "{name} {} {}", c.op.symbol(), c.value)?;
        }
        Ok(())
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
