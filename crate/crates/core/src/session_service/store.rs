//! Data directory layout:
//!
//! ```text
//! <data>/models/<id>.amm
//! <data>/sessions/<id>.jsonl   one LogRecord per line
//! <data>/outbox/<id>.json      undelivered reports
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{LogRecord, SessionError};
use crate::maintenance_model::MODEL_EXTENSION;

fn models_dir(dir: &Path) -> PathBuf {
    dir.join("models")
}

fn sessions_dir(dir: &Path) -> PathBuf {
    dir.join("sessions")
}

pub(crate) fn outbox_dir(dir: &Path) -> PathBuf {
    dir.join("outbox")
}

pub(crate) fn ensure_layout(dir: &Path) -> Result<(), SessionError> {
    for d in [models_dir(dir), sessions_dir(dir), outbox_dir(dir)] {
        fs::create_dir_all(d)?;
    }
    Ok(())
}

pub(crate) fn session_id(n: u64) -> String {
    format!("s{n:06}")
}

pub(crate) fn session_number(id: &str) -> u64 {
    id.strip_prefix('s')
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

fn sorted_entries(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, SessionError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn read_models(dir: &Path) -> Result<Vec<(String, String)>, SessionError> {
    sorted_entries(&models_dir(dir), MODEL_EXTENSION)?
        .into_iter()
        .map(|(id, path)| Ok((id, fs::read_to_string(path)?)))
        .collect()
}

/// Writes through a temporary file so a crash never leaves half a model.
pub(crate) fn write_model(dir: &Path, id: &str, text: &str) -> Result<(), SessionError> {
    let target = models_dir(dir).join(format!("{id}.{MODEL_EXTENSION}"));
    let tmp = target.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, target)?;
    Ok(())
}

fn log_path(dir: &Path, id: &str) -> PathBuf {
    sessions_dir(dir).join(format!("{id}.jsonl"))
}

pub(crate) fn append_records(
    dir: &Path,
    id: &str,
    records: &[LogRecord],
) -> Result<(), SessionError> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&serde_json::to_string(r).map_err(|e| SessionError::Io(e.to_string()))?);
        buf.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path(dir, id))?;
    f.write_all(buf.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub(crate) fn read_log(dir: &Path, id: &str) -> Result<Vec<LogRecord>, SessionError> {
    let path = log_path(dir, id);
    if !path.exists() {
        return Err(SessionError::UnknownSession(id.to_string()));
    }
    parse_log(&fs::read_to_string(path)?)
        .map_err(|e| SessionError::Replay(format!("session '{id}': {e}")))
}

/// Parses a JSON-lines log. A torn final line (crash mid-write) is dropped.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, String> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<LogRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

pub(crate) fn read_sessions(dir: &Path) -> Result<Vec<(String, Vec<LogRecord>)>, SessionError> {
    sorted_entries(&sessions_dir(dir), "jsonl")?
        .into_iter()
        .map(|(id, _)| {
            let log = read_log(dir, &id)?;
            Ok((id, log))
        })
        .collect()
}
