//! Compile a task tree and walk the resulting automaton by hand.

use emaint::automaton::{compile, Action};
use emaint::task_model::parse_model;

fn main() {
    let model = parse_model(
        "task seq s { leaf unplug { nominal=5 } task par p { leaf left { nominal=9 } leaf right { nominal=9 weight=3 } } }",
    )
    .unwrap();
    let pdfa = compile(&model).unwrap();
    println!(
        "{} states, {} transitions",
        pdfa.state_count(),
        pdfa.transition_count()
    );

    let mut s = pdfa.initial();
    for step in ["complete(unplug)", "complete(right)", "complete(left)"] {
        let action: Action = step.parse().unwrap();
        for (a, p) in pdfa.enabled(s).unwrap() {
            println!("  {s}: {a} p={p:.2}");
        }
        println!(
            "take {action} ({:.2} bits)",
            pdfa.surprisal(s, &action).unwrap()
        );
        s = pdfa.step(s, &action).unwrap();
    }
    println!("accepting: {}", pdfa.is_accepting(s).unwrap());
    println!("{} legal orders", pdfa.language(3).len());
    print!("{}", pdfa.to_dot());
}
