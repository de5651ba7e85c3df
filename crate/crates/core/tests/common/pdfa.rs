//! Structural checks on compiled automata, written against the public state list.

use std::collections::BTreeSet;

use emaint::automaton::{Action, Pdfa};

/// Independent structural check; returns the first problem found.
pub fn well_formed(pdfa: &Pdfa) -> Result<(), String> {
    let states = pdfa.states();
    let mut reached = BTreeSet::from([pdfa.initial().0]);
    let mut frontier = vec![pdfa.initial().0];
    while let Some(i) = frontier.pop() {
        for t in &states[i].transitions {
            if reached.insert(t.target.0) {
                frontier.push(t.target.0);
            }
        }
    }
    // states that can reach acceptance, by fixpoint
    let mut live: BTreeSet<usize> = (0..states.len()).filter(|&i| states[i].accepting).collect();
    loop {
        let before = live.len();
        for (i, s) in states.iter().enumerate() {
            if s.transitions.iter().any(|t| live.contains(&t.target.0)) {
                live.insert(i);
            }
        }
        if live.len() == before {
            break;
        }
    }
    for &i in &reached {
        let s = &states[i];
        let labels: BTreeSet<&Action> = s.transitions.iter().map(|t| &t.action).collect();
        if labels.len() != s.transitions.len() {
            return Err(format!("s{i}: two transitions share a label"));
        }
        if !s.accepting {
            let sum: f64 = s.transitions.iter().map(|t| t.probability).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("s{i}: outgoing mass {sum}"));
            }
        }
        if !live.contains(&i) {
            return Err(format!("s{i}: dead end"));
        }
    }
    Ok(())
}
