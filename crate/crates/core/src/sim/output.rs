use std::io::{self, Write};

use serde::Serialize;

use super::{ClusterSpec, SimOutput, Topology};

/// Writes `job_id,arrival,completion,response,slowdown`, one row per job.
pub fn write_records_csv<W: Write>(output: &SimOutput, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "job_id,arrival,completion,response,slowdown")?;
    for r in &output.records {
        writeln!(out, "{},{},{},{},{}", r.job_id, r.arrival, r.completion, r.response, r.slowdown)?;
    }
    out.flush()
}

/// Side-channel summary written next to the records CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummaryJson {
    pub event_count: u64,
    pub p_idle: f64,
    pub policy: String,
    pub granularity: String,
    pub n: u32,
    pub mu: f64,
    pub seed: u64,
    pub theta: Option<f64>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    pub sim_end_time: f64,
    pub utilization: Vec<f64>,
    pub idle_messages: u64,
    pub migrations: u64,
}

impl SimSummaryJson {
    pub fn new(output: &SimOutput, spec: &ClusterSpec) -> SimSummaryJson {
        let (theta, n1, n2) = match spec.topology {
            Topology::SingleStage { .. } => (None, None, None),
            Topology::TwoStage { n1, n2, theta } => (Some(theta), Some(n1), Some(n2)),
        };
        SimSummaryJson {
            event_count: output.event_count,
            p_idle: output.p_idle(),
            policy: spec.effective_policy().to_string(),
            granularity: spec.granularity.as_str().to_owned(),
            n: spec.topology.total_servers(),
            mu: spec.mu,
            seed: spec.seed,
            theta,
            n1,
            n2,
            sim_end_time: output.sim_end_time,
            utilization: output.utilization(),
            idle_messages: output.idle_messages,
            migrations: output.migrations,
        }
    }
}
