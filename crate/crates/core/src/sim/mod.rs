//! Event-driven simulation of a dispatcher in front of FCFS servers.
//!
//! Dispatching is instantaneous. At job granularity a job is one unit of
//! work `Y`; at task granularity each task is dispatched separately, in
//! index order, at the job's arrival instant. A job completes when its
//! last unit does.
//!
//! The two-stage topology runs RR dispatch into `n1` stage-1 servers that
//! give each task at most `theta / mu` seconds of service. Tasks whose
//! demand exceeds `theta` are dropped there and restarted from scratch on
//! one of `n2` stage-2 servers (again RR).

mod dispatch;
mod engine;
mod output;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::Policy;

pub use dispatch::{least_work_choices, min_after_assignment, Dispatcher, IdleSet, Pool};
pub use engine::{run_sim, run_sim_traced, Assignment};
pub use output::{write_records_csv, SimSummaryJson};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid cluster spec: {0}")]
    InvalidSpec(String),
    #[error("two-stage clusters dispatch tasks; job granularity is not supported")]
    TwoStageNeedsTasks,
    #[error("dispatcher state corrupted: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Job,
    Task,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Job => "job",
            Granularity::Task => "task",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    SingleStage { n: u32 },
    /// `theta` is in reference-server seconds of demand.
    TwoStage { n1: u32, n2: u32, theta: f64 },
}

impl Topology {
    pub fn total_servers(&self) -> u32 {
        match *self {
            Topology::SingleStage { n } => n,
            Topology::TwoStage { n1, n2, .. } => n1 + n2,
        }
    }

    pub fn stage_sizes(&self) -> Vec<u32> {
        match *self {
            Topology::SingleStage { n } => vec![n],
            Topology::TwoStage { n1, n2, .. } => vec![n1, n2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub topology: Topology,
    /// Ignored for two-stage clusters, which always use RR.
    pub policy: Policy,
    /// Server capacity in reference units per second.
    pub mu: f64,
    pub granularity: Granularity,
    pub seed: u64,
}

impl ClusterSpec {
    pub fn single(n: u32, policy: Policy, mu: f64, granularity: Granularity, seed: u64) -> ClusterSpec {
        ClusterSpec { topology: Topology::SingleStage { n }, policy, mu, granularity, seed }
    }

    pub fn two_stage(n1: u32, n2: u32, theta: f64, mu: f64, seed: u64) -> ClusterSpec {
        ClusterSpec {
            topology: Topology::TwoStage { n1, n2, theta },
            policy: Policy::RR,
            mu,
            granularity: Granularity::Task,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(SimError::InvalidSpec(format!("mu must be positive, got {}", self.mu)));
        }
        match self.topology {
            Topology::SingleStage { n } if n >= 1 => Ok(()),
            Topology::SingleStage { .. } => Err(SimError::InvalidSpec("n must be at least 1".into())),
            Topology::TwoStage { n1, n2, theta } => {
                if n1 < 1 || n2 < 1 {
                    return Err(SimError::InvalidSpec("both stages need at least one server".into()));
                }
                if !(theta > 0.0) {
                    return Err(SimError::InvalidSpec(format!("theta must be positive, got {theta}")));
                }
                if self.granularity == Granularity::Job {
                    return Err(SimError::TwoStageNeedsTasks);
                }
                Ok(())
            }
        }
    }

    /// The policy actually in force (two-stage is always RR).
    pub fn effective_policy(&self) -> Policy {
        match self.topology {
            Topology::SingleStage { .. } => self.policy,
            Topology::TwoStage { .. } => Policy::RR,
        }
    }
}

/// What happens to a unit entering stage 1 of a two-stage cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageOutcome {
    /// Finishes in stage 1 after `service` seconds.
    CompletedInStage1 { service: f64 },
    /// Holds its stage-1 server for `timeout` seconds, then restarts in
    /// stage 2 needing `restart_service` seconds.
    MigrateToStage2 { timeout: f64, restart_service: f64 },
}

/// Threshold rule: demands up to and including `theta` finish in stage 1.
pub fn two_stage_step(demand: f64, theta: f64, mu: f64) -> Result<StageOutcome, SimError> {
    if !(theta > 0.0) {
        return Err(SimError::InvalidSpec(format!("theta must be positive, got {theta}")));
    }
    Ok(if demand <= theta {
        StageOutcome::CompletedInStage1 { service: demand / mu }
    } else {
        StageOutcome::MigrateToStage2 { timeout: theta / mu, restart_service: demand / mu }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub job_id: String,
    pub arrival: f64,
    pub completion: f64,
    pub total_demand: f64,
    pub response: f64,
    /// Response over `total_demand / mu`.
    pub slowdown: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    /// One record per job, in trace order.
    pub records: Vec<JobRecord>,
    /// Whether some (stage-1) server was idle just before each job's first
    /// assignment.
    pub arrival_idle_observations: Vec<bool>,
    pub event_count: u64,
    pub sim_end_time: f64,
    /// Wall-clock service rendered per stage, summed over its servers.
    pub busy_time: Vec<f64>,
    pub stage_servers: Vec<u32>,
    /// Idle notifications sent to a JIQ dispatcher.
    pub idle_messages: u64,
    /// Units restarted in stage 2.
    pub migrations: u64,
}

impl SimOutput {
    pub fn p_idle(&self) -> f64 {
        let idle = self.arrival_idle_observations.iter().filter(|&&b| b).count();
        idle as f64 / self.arrival_idle_observations.len() as f64
    }

    /// Busy fraction of each stage over `[0, sim_end_time]`.
    pub fn utilization(&self) -> Vec<f64> {
        self.busy_time
            .iter()
            .zip(&self.stage_servers)
            .map(|(b, &n)| b / (n as f64 * self.sim_end_time))
            .collect()
    }
}
