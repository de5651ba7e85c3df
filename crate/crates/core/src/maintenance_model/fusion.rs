//! Derived signals computed from raw signal history.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum Fusion {
    /// Mean of the last `window` values of `input`.
    MovingAverage { input: String, window: usize },
    /// How many of the last `window` values of `input` exceed `threshold`.
    ThresholdCount {
        input: String,
        threshold: f64,
        window: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSignal {
    pub name: String,
    pub fusion: Fusion,
}

impl Fusion {
    pub fn input(&self) -> &str {
        match self {
            Fusion::MovingAverage { input, .. } | Fusion::ThresholdCount { input, .. } => input,
        }
    }

    pub fn window(&self) -> usize {
        match self {
            Fusion::MovingAverage { window, .. } | Fusion::ThresholdCount { window, .. } => *window,
        }
    }

    /// `history` is oldest-first. `None` when there is no input yet.
    pub fn compute(&self, history: &VecDeque<f64>) -> Option<f64> {
        if history.is_empty() {
            return None;
        }
        let skip = history.len().saturating_sub(self.window());
        let recent = history.iter().skip(skip);
        Some(match self {
            Fusion::MovingAverage { .. } => {
                let n = history.len() - skip;
                recent.sum::<f64>() / n as f64
            }
            Fusion::ThresholdCount { threshold, .. } => {
                recent.filter(|v| **v > *threshold).count() as f64
            }
        })
    }
}

/// Bounded per-signal value history feeding derived signals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalHistory {
    values: BTreeMap<String, VecDeque<f64>>,
    capacity: BTreeMap<String, usize>,
}

impl SignalHistory {
    pub fn for_signals(derived: &[DerivedSignal]) -> Self {
        let mut capacity: BTreeMap<String, usize> = BTreeMap::new();
        for d in derived {
            let c = capacity.entry(d.fusion.input().to_string()).or_insert(0);
            *c = (*c).max(d.fusion.window());
        }
        SignalHistory {
            values: BTreeMap::new(),
            capacity,
        }
    }

    pub fn push(&mut self, signal: &str, value: f64) {
        let Some(&cap) = self.capacity.get(signal) else {
            return;
        };
        let h = self.values.entry(signal.to_string()).or_default();
        h.push_back(value);
        while h.len() > cap {
            h.pop_front();
        }
    }

    pub fn compute(&self, d: &DerivedSignal) -> Option<f64> {
        self.values
            .get(d.fusion.input())
            .and_then(|h| d.fusion.compute(h))
    }
}
