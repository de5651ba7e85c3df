//! Run a whole guided session in-process and print the final report.

use std::collections::BTreeMap;
use std::sync::Arc;

use emaint::clock::{ManualClock, Timestamp};
use emaint::session_service::{ProblemCategory, ProblemReport, Service, ServiceConfig, StepBody};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(Timestamp(0)));
    let svc = Service::open(
        ServiceConfig {
            data_dir: dir.path().into(),
            report_url: None,
        },
        clock.clone(),
    )
    .unwrap();
    svc.import_model(include_str!("../fixtures/pump_overhaul.amm"))
        .unwrap();

    let view = svc.create_session("p101-seal", "ana", None).unwrap();
    let id = view.session_id.clone();
    println!("{id}: tier {} level {}", view.tier, view.level);

    let help = svc.request_help(&id, "lockout").unwrap();
    println!("help served at {} (asked {})", help.served, help.requested);
    let alerts = svc
        .ingest_values(&id, &BTreeMap::from([("temp".to_string(), 91.0)]))
        .unwrap();
    println!("{} alert(s)", alerts.len());
    svc.report_problem(
        &id,
        ProblemReport {
            category: ProblemCategory::IncorrectDocumentation,
            leaf_id: "lockout".into(),
            note: "breaker label differs".into(),
            tag: None,
        },
    )
    .unwrap();

    let script = [
        ("lockout", 50),
        ("drain", 80),
        ("remove_guard", 35),
        ("unbolt_cover", 45),
        ("inspect_impeller", 40),
        ("replace_seal", 110),
        ("torque_bolts", 28),
        ("restart", 40),
    ];
    for (leaf, secs) in script {
        clock.advance_secs(secs.into());
        let v = svc.complete_task(&id, leaf, secs).unwrap();
        if leaf == "torque_bolts" {
            svc.exit_loop(&id, "torque").unwrap();
        }
        println!("{leaf:<16} -> tier {} level {}", v.tier, v.level);
    }
    assert!(matches!(
        svc.get_current_step(&id).unwrap().body,
        StepBody::Done
    ));
    let report = svc.finish_session(&id).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
