use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::RunSummary;
use crate::error::{Error, Result};
use crate::param::mean_of;
use crate::search::Method;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub env_id: String,
    pub method: Method,
    pub runs: usize,
    pub seeds: String,
    pub initial_percent_error_mean: f64,
    pub final_percent_error_mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub final_percent_error_std: f64,
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean_of(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Groups completed runs by method. All runs must share one environment and
/// carry evaluation columns (not blind).
pub fn compare_runs(dirs: &[PathBuf]) -> Result<Vec<CompareRow>> {
    if dirs.len() < 2 {
        return Err(Error::Config(format!(
            "compare needs at least two run directories, got {}",
            dirs.len()
        )));
    }
    let mut summaries = Vec::with_capacity(dirs.len());
    for dir in dirs {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "run directory not found"),
            ));
        }
        let s = RunSummary::load(dir)?;
        if s.final_mean_percent_error.is_none() {
            return Err(Error::Config(format!(
                "{} is a blind run and has no percent error",
                dir.display()
            )));
        }
        summaries.push(s);
    }
    let first = &summaries[0];
    if let Some(other) = summaries
        .iter()
        .find(|s| s.env_id != first.env_id || s.param_names != first.param_names)
    {
        return Err(Error::Config(format!(
            "runs cover different environments: {} and {}",
            first.env_id, other.env_id
        )));
    }
    let mut rows = Vec::new();
    for method in Method::ALL {
        let group: Vec<&RunSummary> = summaries.iter().filter(|s| s.method == method).collect();
        if group.is_empty() {
            continue;
        }
        let finals: Vec<f64> = group.iter().filter_map(|s| s.final_mean_percent_error).collect();
        let initials: Vec<f64> = group.iter().filter_map(|s| s.initial_mean_percent_error).collect();
        let seeds: BTreeSet<u64> = group.iter().map(|s| s.seed).collect();
        rows.push(CompareRow {
            env_id: first.env_id.clone(),
            method,
            runs: group.len(),
            seeds: seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            initial_percent_error_mean: mean_of(&initials),
            final_percent_error_mean: mean_of(&finals),
            final_percent_error_std: sample_std(&finals),
        });
    }
    Ok(rows)
}

pub fn format_table(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:<16} {:<20} {:>4} {:>12} {:>20}\n",
        "env", "method", "runs", "initial %err", "final %err"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<20} {:>4} {:>12.2} {:>11.2} ± {:<6.2}",
            r.env_id,
            r.method.as_str(),
            r.runs,
            r.initial_percent_error_mean,
            r.final_percent_error_mean,
            r.final_percent_error_std
        );
    }
    out
}

pub fn write_compare_csv(rows: &[CompareRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Compares runs, writes the CSV to `out` and returns the printed table.
pub fn cmd_compare(dirs: &[PathBuf], out: &Path) -> Result<(Vec<CompareRow>, String)> {
    let rows = compare_runs(dirs)?;
    write_compare_csv(&rows, out)?;
    let table = format_table(&rows);
    Ok((rows, table))
}
