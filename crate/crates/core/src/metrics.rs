//! Summary statistics over simulated job records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimOutput;
use crate::stats;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no values to summarize")]
    Empty,
}

pub const RESPONSE_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_jobs: usize,
    pub mean_response: f64,
    pub mean_slowdown: f64,
    pub min_slowdown: f64,
    pub min_response: f64,
    pub max_response: f64,
    pub p_idle_at_arrival: f64,
    /// Nearest-rank response time quantiles, `(q, seconds)`.
    pub response_percentiles: Vec<(f64, f64)>,
    /// Busy fraction per stage.
    pub realized_utilization: Vec<f64>,
}

pub fn summarize(output: &SimOutput) -> Result<Summary, MetricsError> {
    summarize_truncated(output, 0)
}

/// Like [`summarize`] but drops the first `warmup_jobs` records (and idle
/// observations) from the job statistics.
pub fn summarize_truncated(output: &SimOutput, warmup_jobs: usize) -> Result<Summary, MetricsError> {
    let records = output.records.get(warmup_jobs..).unwrap_or(&[]);
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let obs = &output.arrival_idle_observations[warmup_jobs.min(output.arrival_idle_observations.len())..];
    let n = records.len() as f64;
    let responses = stats::sorted(records.iter().map(|r| r.response));
    Ok(Summary {
        n_jobs: records.len(),
        mean_response: records.iter().map(|r| r.response).sum::<f64>() / n,
        mean_slowdown: records.iter().map(|r| r.slowdown).sum::<f64>() / n,
        min_slowdown: records.iter().map(|r| r.slowdown).fold(f64::INFINITY, f64::min),
        min_response: responses[0],
        max_response: responses[responses.len() - 1],
        p_idle_at_arrival: obs.iter().filter(|&&b| b).count() as f64 / obs.len().max(1) as f64,
        response_percentiles: RESPONSE_QUANTILES.iter().map(|&q| (q, stats::quantile_sorted(&responses, q))).collect(),
        realized_utilization: output.utilization(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Nearest-rank quartiles plus range.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let v = stats::sorted(values.iter().copied());
    Ok(BoxplotStats {
        min: v[0],
        q1: stats::quantile_sorted(&v, 0.25),
        median: stats::quantile_sorted(&v, 0.5),
        q3: stats::quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}
