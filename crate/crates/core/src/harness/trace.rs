use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact CSV header of a trace file.
pub const TRACE_HEADER: &str = "replication,t,error,alpha";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replication: u64,
    pub t: u64,
    pub error: f64,
    pub alpha: f64,
}

/// Checkpoint errors of all replications, ordered by replication then `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrace {
    pub rows: Vec<TraceRow>,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl ErrorTrace {
    /// Checks that `t` strictly increases within each replication and
    /// errors are non-negative.
    pub fn validate(&self) -> Result<()> {
        let mut last: Option<(u64, u64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !(row.error >= 0.0) {
                return Err(Error::input(format!("row {i}: error {} is not non-negative", row.error)));
            }
            if let Some((rep, t)) = last {
                if rep == row.replication && row.t <= t {
                    return Err(Error::input(format!("row {i}: t does not increase within replication {rep}")));
                }
            }
            last = Some((row.replication, row.t));
        }
        Ok(())
    }

    pub fn replications(&self) -> Vec<u64> {
        let mut reps: Vec<u64> = self.rows.iter().map(|r| r.replication).collect();
        reps.sort_unstable();
        reps.dedup();
        reps
    }

    /// Median error across replications at every checkpoint.
    pub fn median_by_checkpoint(&self) -> Vec<(u64, f64)> {
        let mut by_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            by_t.entry(row.t).or_default().push(row.error);
        }
        by_t.into_iter().map(|(t, mut errs)| (t, median(&mut errs))).collect()
    }

    /// Error at the last checkpoint of each replication.
    pub fn final_errors(&self) -> Vec<f64> {
        let mut last: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
        for row in &self.rows {
            let entry = last.entry(row.replication).or_insert((row.t, row.error));
            if row.t >= entry.0 {
                *entry = (row.t, row.error);
            }
        }
        last.into_values().map(|(_, e)| e).collect()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer
            .into_inner()
            .map_err(|e| Error::Numeric(format!("csv buffer: {e}")))
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(reader);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != TRACE_HEADER {
            return Err(Error::input(format!(
                "trace header must be `{TRACE_HEADER}`, found `{}`",
                header.join(",")
            )));
        }
        let rows = reader.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        let trace = ErrorTrace { rows };
        trace.validate()?;
        Ok(trace)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ErrorTrace::from_csv_reader(file)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        ensure_parent(path)?;
        std::fs::write(path, self.to_csv_bytes()?).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}
