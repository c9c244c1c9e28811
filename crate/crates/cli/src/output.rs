//! Result files. Every write goes to a temporary file in the target
//! directory and is renamed into place only once complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(seed: u64, config_sha256: String) -> Self {
        Self { version: env!("CARGO_PKG_VERSION"), seed, config_sha256 }
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Fails early when `path` cannot be written, before any long computation.
pub fn check_writable(path: &Path) -> Result<(), CliError> {
    let dir = parent_dir(path);
    tempfile::NamedTempFile::new_in(&dir)
        .map(drop)
        .map_err(|e| CliError::Runtime(format!("cannot write to {}: {e}", dir.display())))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path)).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Adds a `meta` field to a JSON object result.
pub fn with_meta<T: Serialize>(result: &T, meta: &Meta) -> Value {
    let mut v = serde_json::to_value(result).expect("result serializes");
    if let Value::Object(map) = &mut v {
        map.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    }
    v
}

pub fn pretty(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("value serializes");
    out.push(b'\n');
    out
}

/// JSON to `path`, or to stdout without one.
pub fn emit_json(path: Option<&Path>, v: &Value) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, &pretty(v)),
        None => {
            std::io::stdout()
                .write_all(&pretty(v))
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Line-oriented output (CSV, JSON lines) with metadata in `<path>.meta.json`.
/// `extra` fields are merged into the sidecar.
pub fn emit_tabular(path: Option<&Path>, body: &[u8], meta: &Meta, extra: Option<Value>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut side = serde_json::to_value(meta).expect("meta serializes");
            if let (Value::Object(map), Some(Value::Object(more))) = (&mut side, extra) {
                map.extend(more);
            }
            write_atomic(p, body)?;
            write_atomic(&sidecar_path(p), &pretty(&side))
        }
        None => std::io::stdout().write_all(body).map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}
