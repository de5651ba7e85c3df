//! Evaluate context rules against a signal frame.

use emaint::clock::Timestamp;
use emaint::context_sa::{
    evaluate_available, evaluate_contexts, ContextRule, EvalInput, Severity, SignalFrame,
};

fn rule(id: &str, when: &str, severity: Severity, scope: &[&str]) -> ContextRule {
    ContextRule {
        id: id.into(),
        scope: scope.iter().map(|s| s.to_string()).collect(),
        predicate: when.parse().unwrap(),
        severity,
        message: format!("{id} holds"),
    }
}

fn main() {
    let rules = [
        rule("hot", "temp > 80", Severity::Danger, &["drain"]),
        rule("slow", "elapsed > 300", Severity::Info, &[]),
        rule(
            "odd",
            "surprisal > 3 and vibration >= 7",
            Severity::Warning,
            &[],
        ),
    ];
    let now = Timestamp(5_000);
    let frame = SignalFrame::new().with("temp", 92.5, now);
    let input = EvalInput {
        current_leaf: Some("drain"),
        frame: &frame,
        elapsed: 420.0,
        surprisal: 4.0,
        now,
    };

    let (alerts, waiting) = evaluate_available(&rules, &input);
    for a in &alerts {
        println!("{:?} {}: {}", a.severity, a.rule_id, a.message);
    }
    for w in &waiting {
        println!("waiting: {w}");
    }
    // the strict variant refuses to guess about missing signals
    println!("{:?}", evaluate_contexts(&rules, &input).unwrap_err());
}
