//! Small file helpers shared by the stages.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::StageError;

/// Write via a temp file in the same directory plus rename, so readers never
/// observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    let dir = path
        .parent()
        .ok_or_else(|| StageError::failure(format!("no parent directory for {}", path.display())))?;
    fs::create_dir_all(dir)
        .map_err(|e| StageError::failure(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .map_err(|e| StageError::failure(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| StageError::failure(format!("cannot rename {} -> {}: {e}", tmp.display(), path.display())))?;
    Ok(())
}

/// Serialize records as line-delimited JSON and write atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StageError> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| StageError::failure(format!("cannot serialize record: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Read a whole line-delimited JSON artifact produced by an earlier stage.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| StageError::failure(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (index, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| {
            StageError::failure(format!("{} line {}: {e}", path.display(), index + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Percentage rounded half away from zero, for report tables.
pub fn percent(fraction: f64) -> i64 {
    (fraction * 100.0).round() as i64
}
