//! Per-round metrics CSV.
//!
//! One row per (round, parameter). Columns, in order:
//!
//! | column          | meaning                                                  |
//! |-----------------|----------------------------------------------------------|
//! | `version`       | schema version, currently 1                              |
//! | `round`         | 0 is pretraining, then 1..=K                             |
//! | `param_name`    | schema name                                              |
//! | `mean`          | randomization mean after the round                       |
//! | `hidden_real`   | true value; empty in blind runs                          |
//! | `percent_error` | `100 |mean - real| / real`; empty in blind runs          |
//! | `aggregate_prob`| probability that drove the update; empty if none         |
//! | `decision`      | `up`, `down` or `hold`                                   |
//! | `config_hash`   | same for every row of a run                              |
//! | `timestamp`     | unix seconds when the row was written                    |
//!
//! `timestamp` is always last so determinism checks can drop it by position.
//! Floats are written with Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{percent_error, ParamSchema, ParamVector};
use crate::search::{Decision, RoundRecord};

pub const CSV_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub version: u32,
    pub round: usize,
    pub param_name: String,
    pub mean: f64,
    pub hidden_real: Option<f64>,
    pub percent_error: Option<f64>,
    pub aggregate_prob: Option<f64>,
    pub decision: Decision,
    pub config_hash: String,
    pub timestamp: u64,
}

/// Rows for one round record. `truth` is `None` in blind runs.
pub fn rows_for(
    schema: &ParamSchema,
    record: &RoundRecord,
    truth: Option<&ParamVector>,
    config_hash: &str,
    timestamp: u64,
) -> Result<Vec<MetricsRow>> {
    let errors = truth.map(|t| percent_error(&record.mean, t)).transpose()?;
    Ok((0..schema.len())
        .map(|i| MetricsRow {
            version: CSV_VERSION,
            round: record.round,
            param_name: schema.name(i).to_string(),
            mean: record.mean.values()[i],
            hidden_real: truth.map(|t| t.values()[i]),
            percent_error: errors.as_ref().map(|e| e[i]),
            aggregate_prob: record.aggregate.as_ref().map(|a| a[i]),
            decision: record.decisions[i],
            config_hash: config_hash.to_string(),
            timestamp,
        })
        .collect())
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Streams rows to disk, flushing after every round so partial runs stay readable.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            inner: csv::Writer::from_writer(file),
        })
    }

    pub fn write_rows(&mut self, rows: &[MetricsRow]) -> Result<()> {
        for row in rows {
            self.inner.serialize(row)?;
        }
        self.inner.flush().map_err(|e| Error::Csv(e.into()))
    }
}

/// Reads a metrics file, rejecting other schema versions.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let row: MetricsRow = row?;
        if row.version != CSV_VERSION {
            return Err(Error::Config(format!(
                "{}: metrics version {} is not supported (expected {CSV_VERSION})",
                path.display(),
                row.version
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// File contents with the trailing timestamp column removed from every line.
pub fn strip_timestamps(csv_text: &str) -> String {
    let mut out = String::with_capacity(csv_text.len());
    for line in csv_text.lines() {
        let kept = line.rsplit_once(',').map_or(line, |(head, _)| head);
        out.push_str(kept);
        out.push('\n');
    }
    out
}

/// Writes `name -> {value, unit, kind}` tables for a parameter vector.
pub fn write_param_table(schema: &ParamSchema, values: &ParamVector, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (entry, v) in schema.entries().iter().zip(values.iter()) {
        text.push_str(&format!(
            "[{}]\nvalue = {v:?}\nunit = {:?}\nkind = \"{}\"\n\n",
            entry.name, entry.unit, entry.kind
        ));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct TableEntry {
    value: f64,
}

/// Reads a table written by [`write_param_table`], in schema order.
pub fn read_param_table(schema: &ParamSchema, path: &Path) -> Result<ParamVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: std::collections::BTreeMap<String, TableEntry> =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let values = schema
        .names()
        .map(|n| {
            table
                .get(n)
                .map(|e| e.value)
                .ok_or_else(|| Error::Config(format!("{}: missing parameter {n}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    ParamVector::new(values)
}
