//! Log-log least-squares rate estimation.

use super::output::{fmt_float, CsvTable};
use crate::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub const MIN_FIT_POINTS: usize = 8;

/// Line `ln y = intercept + slope ln k` fitted over `[k_lo, k_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub k_lo: f64,
    pub k_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl RateFit {
    pub fn predict(&self, k: f64) -> f64 {
        (self.intercept + self.slope * k.ln()).exp()
    }

    /// The fitted power law sampled at `ks`, as a `k,fit` CSV.
    pub fn curve_csv(&self, ks: &[f64]) -> String {
        let mut out = String::from("k,fit\n");
        for &k in ks {
            let _ = writeln!(out, "{},{}", k, fmt_float(self.predict(k)));
        }
        out
    }
}

pub fn fit_rate(ks: &[f64], values: &[f64], k_lo: f64, k_hi: f64) -> Result<RateFit> {
    if ks.len() != values.len() {
        return Err(Error::InvalidInput("k and value columns differ in length".into()));
    }
    if !(k_lo > 0.0 && k_lo <= k_hi) {
        return Err(Error::InvalidInput(format!(
            "window [{k_lo}, {k_hi}] must satisfy 0 < k_lo <= k_hi"
        )));
    }
    let mut pts = Vec::new();
    for (&k, &y) in ks.iter().zip(values) {
        if k < k_lo || k > k_hi {
            continue;
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "metric value {y} at k = {k} has no logarithm"
            )));
        }
        pts.push((k.ln(), y.ln()));
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all points share one k".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // a perfectly flat series is fitted exactly
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        k_lo,
        k_hi,
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Fits `metric` (see [`CsvTable::metric`]) from a trajectory or aggregate CSV.
pub fn fit_rate_csv(path: impl AsRef<Path>, metric: &str, k_lo: f64, k_hi: f64) -> Result<RateFit> {
    let table = CsvTable::read(path)?;
    fit_rate_table(&table, metric, k_lo, k_hi)
}

pub fn fit_rate_table(table: &CsvTable, metric: &str, k_lo: f64, k_hi: f64) -> Result<RateFit> {
    let ks = table
        .column("k")
        .ok_or_else(|| Error::InvalidInput("CSV has no `k` column".into()))?;
    fit_rate(&ks, &table.metric(metric)?, k_lo, k_hi)
}

/// `count` log-spaced integers in `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp().round() as u64)
        .collect();
    v.dedup();
    v
}
