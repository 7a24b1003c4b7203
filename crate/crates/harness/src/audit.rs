//! Oracle audit entry point.

use std::fs;
use std::path::Path;

use pgsom_core::oracle::audit::{run_checks, AuditOptions, AuditReport};

use crate::HarnessError;

pub const AUDIT_FILE: &str = "audit.json";

/// Runs the oracle suite with `opts` and writes the JSON report to `path`.
pub fn run_audit(opts: &AuditOptions, path: &Path) -> Result<AuditReport, HarnessError> {
    let report = run_checks(opts)?;
    let bytes = serde_json::to_vec_pretty(&report)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(report)
}
