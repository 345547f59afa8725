//! CSV emission and cross-seed aggregation.
//!
//! Per-seed files carry `k,opt_gap,consensus,tracking,conservation_residual`;
//! the aggregate replaces each metric with `<metric>_mean`, `<metric>_median`
//! and `<metric>_var`. Floats are written with 17 significant digits.

use crate::algorithm::{DiagnosticRow, TrajectoryRow};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub const METRICS: [&str; 4] = ["opt_gap", "consensus", "tracking", "conservation_residual"];

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn metric_values(row: &TrajectoryRow) -> [f64; 4] {
    [row.opt_gap, row.consensus, row.tracking, row.conservation_residual]
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("k,");
    out.push_str(&METRICS.join(","));
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.k);
        for v in metric_values(row) {
            let _ = write!(out, ",{}", fmt_float(v));
        }
        out.push('\n');
    }
    out
}

pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from("k,tracker_gap,tracker_sum_residual,composite_v,grad_norm\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_float(r.tracker_gap),
            fmt_float(r.tracker_sum_residual),
            fmt_float(r.composite_v),
            fmt_float(r.grad_norm)
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Unbiased sample variance; zero for a single seed.
    pub var: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    assert!(n > 0, "summary of empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Summary { mean, median, var }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: u64,
    /// One summary per entry of [`METRICS`].
    pub metrics: [Summary; 4],
}

/// Summaries across runs at each recorded `k`. All runs must share
/// checkpoints.
pub fn aggregate(runs: &[&[TrajectoryRow]]) -> Result<Vec<AggregateRow>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidInput("no runs to aggregate".into()))?;
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(Error::InvalidInput("runs recorded different checkpoints".into()));
    }
    (0..first.len())
        .map(|t| {
            let k = first[t].k;
            if runs.iter().any(|r| r[t].k != k) {
                return Err(Error::InvalidInput(format!("runs disagree on checkpoint {t}")));
            }
            let metrics = std::array::from_fn(|m| {
                let vals: Vec<f64> = runs.iter().map(|r| metric_values(&r[t])[m]).collect();
                summarize(&vals)
            });
            Ok(AggregateRow { k, metrics })
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("k");
    for m in METRICS {
        let _ = write!(out, ",{m}_mean,{m}_median,{m}_var");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.k);
        for s in &row.metrics {
            let _ = write!(
                out,
                ",{},{},{}",
                fmt_float(s.mean),
                fmt_float(s.median),
                fmt_float(s.var)
            );
        }
        out.push('\n');
    }
    out
}

/// Column-oriented view of a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(vals);
        }
        Ok(Self { headers, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Resolves a metric by exact column name, then `<name>_mean`. A `+`
    /// separated list sums the resolved columns.
    pub fn metric(&self, spec: &str) -> Result<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for part in spec.split('+').map(str::trim) {
            let col = self
                .column(part)
                .or_else(|| self.column(&format!("{part}_mean")))
                .ok_or_else(|| Error::InvalidInput(format!("no column {part:?} or {part}_mean in CSV")))?;
            acc = Some(match acc {
                None => col,
                Some(a) => a.iter().zip(&col).map(|(x, y)| x + y).collect(),
            });
        }
        acc.ok_or_else(|| Error::InvalidInput("empty metric name".into()))
    }
}
