use std::path::Path;
use std::sync::Arc;

use emaint::clock::SystemClock;
use emaint::session_service::http::serve;
use emaint::session_service::{PostMaintenanceReport, Service, ServiceConfig};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct Server {
    pub base: String,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl Server {
    pub async fn start(dir: &Path, report_url: Option<String>) -> Server {
        let service = Service::open(
            ServiceConfig {
                data_dir: dir.to_path_buf(),
                report_url,
            },
            Arc::new(SystemClock),
        )
        .expect("service opens");
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}/api/v1", listener.local_addr().unwrap());
        let (stop, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(serve(Arc::new(service), listener, async {
            let _ = rx.await;
        }));
        Server {
            base,
            stop: Some(stop),
            handle: Some(handle),
        }
    }

    pub async fn stop(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap().unwrap();
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

pub struct Client {
    pub http: reqwest::Client,
}

impl Client {
    pub fn new() -> Client {
        Client {
            http: reqwest::Client::new(),
        }
    }

    pub async fn get(&self, url: &str) -> (u16, Value) {
        let r = self.http.get(url).send().await.unwrap();
        decode(r).await
    }

    pub async fn post(&self, url: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(url).json(&body).send().await.unwrap();
        decode(r).await
    }

    pub async fn post_text(&self, url: &str, body: &str) -> (u16, Value) {
        let r = self
            .http
            .post(url)
            .body(body.to_string())
            .send()
            .await
            .unwrap();
        decode(r).await
    }
}

async fn decode(r: reqwest::Response) -> (u16, Value) {
    let status = r.status().as_u16();
    let text = r.text().await.unwrap();
    let value = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    (status, value)
}

/// What a full scripted session produced.
pub struct SessionRun {
    pub session_id: String,
    pub report: PostMaintenanceReport,
    pub report_json: Value,
    pub regenerated: Value,
    pub help_tier: Value,
    pub danger_alerts: Value,
}

/// Path through the pump procedure: (action, target, seconds). Every
/// duration is under three quarters of nominal, i.e. fast.
pub const PUMP_SCRIPT: &[(&str, &str, u32)] = &[
    ("complete", "lockout", 40),
    ("complete", "drain", 60),
    ("complete", "unbolt_cover", 30),
    ("complete", "remove_guard", 25),
    ("complete", "inspect_impeller", 30),
    ("complete", "replace_seal", 80),
    ("complete", "torque_bolts", 20),
    ("exit", "torque", 0),
    ("complete", "restart", 30),
];

/// Imports the pump fixture and runs one session for `ben` with one help
/// request, one danger frame and one problem report, then finishes it.
pub async fn scripted_session(server: &Server, client: &Client) -> Result<SessionRun, String> {
    let expect = |what: &str, got: u16, want: u16, body: &Value| {
        if got == want {
            Ok(())
        } else {
            Err(format!("{what}: status {got}, wanted {want}: {body}"))
        }
    };
    let (st, body) = client.post_text(&server.url("/models"), super::PUMP).await;
    expect("import", st, 201, &body)?;
    let (st, body) = client
        .post(
            &server.url("/sessions"),
            json!({ "model_id": "p101-seal", "user_id": "ben", "team_id": "crew" }),
        )
        .await;
    expect("create", st, 201, &body)?;
    let id = body["session_id"]
        .as_str()
        .ok_or("no session id")?
        .to_string();
    let at = |p: &str| server.url(&format!("/sessions/{id}{p}"));

    let (st, help) = client
        .post(&at("/help"), json!({ "leaf": "lockout" }))
        .await;
    expect("help", st, 200, &help)?;
    let (st, alerts) = client
        .post(&at("/signals"), json!({ "values": { "temp": 95.0 } }))
        .await;
    expect("signals", st, 200, &alerts)?;
    let (st, body) = client
        .post(
            &at("/problem"),
            json!({ "category": "incorrect_documentation", "leaf_id": "lockout", "note": "breaker label differs" }),
        )
        .await;
    expect("problem", st, 204, &body)?;

    for (action, target, secs) in PUMP_SCRIPT {
        let (st, body) = match *action {
            "complete" => {
                client
                    .post(
                        &at("/complete"),
                        json!({ "leaf": target, "duration": secs }),
                    )
                    .await
            }
            _ => {
                client
                    .post(&at(&format!("/{action}")), json!({ "target": target }))
                    .await
            }
        };
        expect(&format!("{action} {target}"), st, 200, &body)?;
    }
    let (st, report_json) = client.post(&at("/finish"), json!({})).await;
    expect("finish", st, 200, &report_json)?;
    let report: PostMaintenanceReport =
        serde_json::from_value(report_json.clone()).map_err(|e| format!("report shape: {e}"))?;
    let (st, regenerated) = client.get(&at("/report")).await;
    expect("report", st, 200, &regenerated)?;
    Ok(SessionRun {
        session_id: id,
        report,
        report_json,
        regenerated,
        help_tier: help["served"].clone(),
        danger_alerts: alerts,
    })
}
