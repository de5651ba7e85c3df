//! Parse a task tree, list its leaves and print it back in canonical form.

use emaint::task_model::{parse_model, serialize_model, ValidationScope};

const SOURCE: &str = r#"
model "Filter change" version "2"
task seq change {
  leaf isolate { nominal=30 desc="Close the inlet valve" }
  task choice method {
    leaf swap { nominal=120 desc="Swap the cartridge" }
    leaf clean { nominal=300 desc="Clean and refit" weight=0.5 }
  }
  task opt { leaf log { nominal=20 } }   # unnamed composites get an id
}
"#;

fn main() {
    let model = parse_model(SOURCE).expect("valid source");
    for leaf in model.leaves() {
        println!(
            "{:<8} {:>4}s  {}",
            leaf.id, leaf.nominal_duration, leaf.description
        );
    }
    assert!(model.validate(&ValidationScope::default()).is_empty());
    print!("{}", serialize_model(&model));

    match parse_model("task seq s { leaf a { nominal=5 } }") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
