#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use emaint::clock::{ManualClock, Timestamp};
use emaint::session_service::{Service, ServiceConfig};

pub const PUMP: &str = include_str!("../../fixtures/pump_overhaul.amm");

/// Wraps a task tree in the smallest document that imports: one user
/// (`ana`), one `temp` sensor, and a text binding per leaf.
pub fn amm(name: &str, tasks: &str, leaves: &[&str]) -> String {
    let mut s = format!(
        r#"[model]
name = "{name}"

[equipment]
id = "eq"
name = "Test rig"

[environment]
id = "bench"

[[users]]
id = "ana"
name = "Ana"
role = "technician"

[[sources]]
id = "probe"
kind = "sensor"
transport = "http_push"
signals = ["temp"]

[tasks]
source = """
{tasks}
"""
"#
    );
    for leaf in leaves {
        s.push_str(&format!(
            "\n[[bindings]]\nleaf = \"{leaf}\"\ntier = \"text\"\ncomponents = [{{ kind = \"text\", payload = \"do {leaf}\" }}]\n"
        ));
    }
    s
}

pub fn seq3() -> String {
    amm(
        "seq3",
        "model \"Three steps\"\ntask seq s {\n  leaf a { nominal=10 }\n  leaf b { nominal=20 }\n  leaf c { nominal=30 }\n}",
        &["a", "b", "c"],
    )
}

pub fn open(dir: &Path) -> (Service, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(Timestamp(1_000_000)));
    let service = Service::open(
        ServiceConfig {
            data_dir: dir.to_path_buf(),
            report_url: None,
        },
        clock.clone(),
    )
    .expect("service opens");
    (service, clock)
}

/// A service over a fresh directory with the pump fixture imported.
pub fn pump_service() -> (tempfile::TempDir, Service, Arc<ManualClock>) {
    let dir = tempfile::tempdir().unwrap();
    let (service, clock) = open(dir.path());
    service.import_model(PUMP).unwrap();
    (dir, service, clock)
}

pub mod aggregate;
pub mod gen;
pub mod hmm;
pub mod http;
pub mod pdfa;
