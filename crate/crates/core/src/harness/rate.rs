use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{invalid, Result};

use super::sweep::ResultRow;

/// Least-squares fit of `log(median metric) = intercept + slope * log T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// `(ln T, ln median)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Rows dropped for a missing or non-positive value.
    pub dropped: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Ordinary least squares on at least three points.
pub fn fit_points(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = points.len();
    if n < 3 {
        return Err(invalid(format!("rate fit needs at least 3 horizons, got {n}")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct horizons"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok((slope, intercept, stderr))
}

/// Fits the growth exponent of the per-horizon median of `metric`.
pub fn fit_rate(rows: &[ResultRow], metric: &str) -> Result<RateFit> {
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut dropped = 0;
    for r in rows.iter().filter(|r| r.metric == metric) {
        match r.value {
            Some(v) if v > 0.0 && v.is_finite() && r.error.is_empty() => by_t.entry(r.t).or_default().push(v),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!(dropped, metric, "dropped rows with missing or non-positive values");
    }
    let points: Vec<(f64, f64)> = by_t
        .into_iter()
        .map(|(t, mut vs)| ((t as f64).ln(), median(&mut vs).ln()))
        .collect();
    let (slope, intercept, stderr) = fit_points(&points)?;
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        points,
        dropped,
    })
}
