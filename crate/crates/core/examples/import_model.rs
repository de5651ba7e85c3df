//! Import a `.amm` maintenance model, summarize it and export it again.

use emaint::maintenance_model::{export_model, import_model};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pump_overhaul.amm").to_string()
    });
    let text = std::fs::read_to_string(&path).expect("readable model");
    let model = match import_model(&text) {
        Ok(m) => m,
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{d}");
            }
            std::process::exit(1);
        }
    };
    println!(
        "{} on {} ({})",
        model.name, model.equipment.name, model.environment.id
    );
    println!(
        "{} leaves, {} context rules, {} bindings",
        model.task_model.leaves().len(),
        model.contexts.len(),
        model.bindings.len()
    );
    for u in &model.users {
        println!("user {} {:?} {:?}", u.id, u.role, u.initial_level);
    }
    let again = export_model(&model);
    assert_eq!(import_model(&again).unwrap(), model);
    println!("{} bytes canonical", again.len());
}
