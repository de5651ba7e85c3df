//! Serve the HTTP API on an ephemeral port with the sample model loaded.
//!
//! `cargo run --example serve`, then e.g. `curl localhost:<port>/api/v1/models`.

use std::sync::Arc;

use emaint::clock::SystemClock;
use emaint::session_service::http::serve;
use emaint::session_service::{Service, ServiceConfig};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let svc = Service::open(
        ServiceConfig {
            data_dir: dir.path().into(),
            report_url: std::env::var("EMAINT_REPORT_URL").ok(),
        },
        Arc::new(SystemClock),
    )
    .expect("fresh data dir");
    svc.import_model(include_str!("../fixtures/pump_overhaul.amm"))
        .unwrap();

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    println!("listening on http://{}/api/v1", listener.local_addr()?);
    serve(Arc::new(svc), listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
