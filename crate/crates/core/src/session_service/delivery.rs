use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{PostMaintenanceReport, SessionError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delivery {
    Posted { status: u16 },
    Outbox(PathBuf),
}

/// Writes `report` as `<outbox>/<session>.json`.
pub fn write_outbox(
    outbox: &Path,
    report: &PostMaintenanceReport,
) -> Result<PathBuf, SessionError> {
    fs::create_dir_all(outbox)?;
    let path = outbox.join(format!("{}.json", report.session_id));
    let body = serde_json::to_string_pretty(report).map_err(|e| SessionError::Io(e.to_string()))?;
    fs::write(&path, body + "\n")?;
    Ok(path)
}

/// POSTs `report` as JSON to `url`; on any failure falls back to the outbox.
pub async fn deliver_report(
    url: &str,
    outbox: &Path,
    report: &PostMaintenanceReport,
) -> Result<Delivery, SessionError> {
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(10))
        .build()
        .map_err(|e| SessionError::Io(e.to_string()))?;
    match client.post(url).json(report).send().await {
        Ok(resp) if resp.status().is_success() => Ok(Delivery::Posted {
            status: resp.status().as_u16(),
        }),
        Ok(resp) => {
            tracing::warn!(status = %resp.status(), "report endpoint refused the report");
            Ok(Delivery::Outbox(write_outbox(outbox, report)?))
        }
        Err(e) => {
            tracing::warn!(error = %e, "report endpoint unreachable");
            Ok(Delivery::Outbox(write_outbox(outbox, report)?))
        }
    }
}
