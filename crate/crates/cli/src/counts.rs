//! Per-stage count bookkeeping, persisted as `counts.csv`.
//!
//! Each stage rewrites only its own rows, so rerunning a stage with
//! unchanged inputs reproduces a byte-identical file.

use std::path::Path;

use crate::util::write_atomic;
use crate::StageError;

/// Canonical stage order for the counts file.
const STAGE_ORDER: [&str; 7] = [
    "ingest", "extract", "pair", "build", "diversity", "train", "evaluate",
];

#[derive(Debug, Clone, Default)]
pub struct StageCounts {
    rows: Vec<(String, String, u64)>,
}

impl StageCounts {
    /// Load an existing counts file; a missing file is an empty ledger.
    pub fn load(path: &Path) -> Result<Self, StageError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| StageError::failure(format!("cannot read {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| StageError::failure(format!("bad counts row in {}: {e}", path.display())))?;
            if record.len() != 3 {
                return Err(StageError::failure(format!(
                    "counts row in {} has {} fields, expected 3",
                    path.display(),
                    record.len()
                )));
            }
            let count: u64 = record[2].parse().map_err(|e| {
                StageError::failure(format!("bad count value in {}: {e}", path.display()))
            })?;
            rows.push((record[0].to_string(), record[1].to_string(), count));
        }
        Ok(Self { rows })
    }

    /// Replace every row of `stage` with the given metrics, keeping stages
    /// in canonical order.
    pub fn replace_stage(&mut self, stage: &str, metrics: Vec<(String, u64)>) {
        self.rows.retain(|(s, _, _)| s != stage);
        for (metric, count) in metrics {
            self.rows.push((stage.to_string(), metric, count));
        }
        let order_of = |s: &str| STAGE_ORDER.iter().position(|x| *x == s).unwrap_or(usize::MAX);
        self.rows
            .sort_by_key(|(stage, _, _)| order_of(stage));
    }

    pub fn get(&self, stage: &str, metric: &str) -> Option<u64> {
        self.rows
            .iter()
            .find(|(s, m, _)| s == stage && m == metric)
            .map(|(_, _, c)| *c)
    }

    pub fn rows(&self) -> &[(String, String, u64)] {
        &self.rows
    }

    pub fn write(&self, path: &Path) -> Result<(), StageError> {
        let mut out = String::from("stage,metric,count\n");
        for (stage, metric, count) in &self.rows {
            out.push_str(&format!("{stage},{metric},{count}\n"));
        }
        write_atomic(path, out.as_bytes())
    }
}
