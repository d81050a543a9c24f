//! Workload traces at job and task granularity.
//!
//! A trace is an arrival-ordered list of [`Job`]s, each carrying one or more
//! task CPU demands measured in seconds on a reference server of unit
//! capacity. Traces are immutable: every transform returns a new trace.
//!
//! Arrival times are kept as integer nanoseconds ([`Timestamp`]) so that
//! inter-arrival times can be permuted and re-accumulated without rounding.

mod io;
mod synth;
mod transform;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

pub use io::{parse_trace, read_trace_file, write_trace, write_trace_file, TraceFormat};
pub use synth::{
    generate_synthetic, ArrivalProcess, CountDist, CpuDist, IatDist, MonsterSpec, SynthSpec,
    TaskCountDist,
};
pub use transform::{
    day_window, job_level_view, quantile_task_cpu, shuffle_cpu, shuffle_iat, slice_window,
    strip_outliers, CpuShuffleLevel, Transform, DAY_SECONDS,
};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("trace contains no jobs")]
    Empty,
    #[error("duplicate task {task_index} for job {job_id}")]
    DuplicateTask { job_id: String, task_index: u32 },
    #[error("no jobs arrive in window [{start}, {end})")]
    EmptyWindow { start: f64, end: f64 },
    #[error("need at least {needed} jobs, trace has {found}")]
    TooFewJobs { needed: usize, found: usize },
    #[error("all jobs arrive at the same instant; arrival rate is undefined")]
    ZeroSpan,
    #[error("job-level CPU shuffle needs a job-level trace (one task per job)")]
    NotJobLevel,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WorkloadError>;

/// Nanoseconds since the trace origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    /// Rounds to the nearest nanosecond. Negative or non-finite input is
    /// rejected.
    pub fn from_secs_f64(secs: f64) -> Option<Timestamp> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let nanos = (secs * 1e9).round();
        if nanos >= u64::MAX as f64 {
            return None;
        }
        Some(Timestamp(nanos as u64))
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn nanos(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    /// Exact decimal seconds, without trailing zeros.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0 / 1_000_000_000;
        let frac = self.0 % 1_000_000_000;
        if frac == 0 {
            write!(f, "{secs}")
        } else {
            let digits = format!("{frac:09}");
            write!(f, "{secs}.{}", digits.trim_end_matches('0'))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDemand {
    pub task_index: u32,
    /// Seconds of work on a unit-capacity reference server.
    pub cpu_demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    job_id: String,
    arrival: Timestamp,
    tasks: Vec<TaskDemand>,
    total_demand: f64,
}

impl Job {
    /// Builds a job, sorting tasks by index.
    pub fn new(job_id: impl Into<String>, arrival: Timestamp, mut tasks: Vec<TaskDemand>) -> Result<Job> {
        let job_id = job_id.into();
        if tasks.is_empty() {
            return Err(WorkloadError::InvalidParameter(format!("job {job_id} has no tasks")));
        }
        if let Some(t) = tasks.iter().find(|t| !(t.cpu_demand > 0.0 && t.cpu_demand.is_finite())) {
            return Err(WorkloadError::InvalidParameter(format!(
                "job {job_id} task {} has non-positive demand {}",
                t.task_index, t.cpu_demand
            )));
        }
        tasks.sort_by_key(|t| t.task_index);
        if let Some(w) = tasks.windows(2).find(|w| w[0].task_index == w[1].task_index) {
            return Err(WorkloadError::DuplicateTask { job_id, task_index: w[0].task_index });
        }
        Ok(Self::from_sorted_tasks(job_id, arrival, tasks))
    }

    /// Caller guarantees tasks are non-empty, sorted, unique and positive.
    pub(crate) fn from_sorted_tasks(job_id: String, arrival: Timestamp, tasks: Vec<TaskDemand>) -> Job {
        let total_demand = tasks.iter().map(|t| t.cpu_demand).sum();
        Job { job_id, arrival, tasks, total_demand }
    }

    pub fn job_id(&self) -> &str {
        &self.job_id
    }

    pub fn arrival(&self) -> Timestamp {
        self.arrival
    }

    pub fn arrival_secs(&self) -> f64 {
        self.arrival.as_secs_f64()
    }

    pub fn tasks(&self) -> &[TaskDemand] {
        &self.tasks
    }

    pub fn total_demand(&self) -> f64 {
        self.total_demand
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTrace {
    jobs: Vec<Job>,
    origin_time: f64,
    label: String,
}

impl WorkloadTrace {
    /// Stable-sorts jobs by arrival; ties keep input order.
    pub fn new(mut jobs: Vec<Job>, origin_time: f64, label: impl Into<String>) -> Result<WorkloadTrace> {
        if jobs.is_empty() {
            return Err(WorkloadError::Empty);
        }
        jobs.sort_by_key(|j| j.arrival);
        Ok(WorkloadTrace { jobs, origin_time, label: label.into() })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn origin_time(&self) -> f64 {
        self.origin_time
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn task_count(&self) -> usize {
        self.jobs.iter().map(Job::task_count).sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.jobs.iter().map(Job::total_demand).sum()
    }

    /// True when every job has exactly one task.
    pub fn is_job_level(&self) -> bool {
        self.jobs.iter().all(|j| j.task_count() == 1)
    }

    pub fn span_secs(&self) -> f64 {
        let first = self.jobs[0].arrival;
        let last = self.jobs[self.jobs.len() - 1].arrival;
        Timestamp(last.0 - first.0).as_secs_f64()
    }

    /// Successive inter-arrival times in nanoseconds.
    pub fn iat_nanos(&self) -> Vec<u64> {
        self.jobs.windows(2).map(|w| w[1].arrival.0 - w[0].arrival.0).collect()
    }

    pub(crate) fn with_jobs(&self, jobs: Vec<Job>, label: String) -> Result<WorkloadTrace> {
        WorkloadTrace::new(jobs, self.origin_time, label)
    }
}

/// First- and second-moment summary of a trace at job level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMoments {
    /// Mean job arrival rate, jobs per second.
    pub lambda: f64,
    /// Coefficient of variation of job inter-arrival times.
    pub c_a: f64,
    /// Mean job demand E[Y], reference-server seconds.
    pub mean_y: f64,
    /// Coefficient of variation of job demand.
    pub c_y: f64,
    pub n_jobs: usize,
    pub n_tasks: usize,
}

/// Moment-matches a renewal model to the trace.
///
/// Population variances; simultaneous arrivals contribute zero IATs.
pub fn estimate_moments(trace: &WorkloadTrace) -> Result<WorkloadMoments> {
    if trace.len() < 2 {
        return Err(WorkloadError::TooFewJobs { needed: 2, found: trace.len() });
    }
    let iats: Vec<f64> = trace.iat_nanos().into_iter().map(|n| n as f64 / 1e9).collect();
    let span = trace.span_secs();
    if span <= 0.0 {
        return Err(WorkloadError::ZeroSpan);
    }
    let ys: Vec<f64> = trace.jobs.iter().map(Job::total_demand).collect();
    Ok(WorkloadMoments {
        lambda: (trace.len() - 1) as f64 / span,
        c_a: stats::population_cov(&iats),
        mean_y: stats::mean(&ys),
        c_y: stats::population_cov(&ys),
        n_jobs: trace.len(),
        n_tasks: trace.task_count(),
    })
}

/// Dataset-level descriptive statistics printed by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStats {
    pub moments: WorkloadMoments,
    pub single_task_fraction: f64,
    pub max_tasks_per_job: usize,
    /// Share of total demand carried by the largest 0.1% of jobs.
    pub top_0_1pct_load_share: f64,
    pub frac_jobs_above_mean: f64,
    /// Nearest-rank job demand quantiles at 0.99, 0.999, 0.9999.
    pub job_cpu_quantiles: [(f64, f64); 3],
}

pub fn trace_stats(trace: &WorkloadTrace) -> Result<TraceStats> {
    let moments = estimate_moments(trace)?;
    let n = trace.len();
    let ys = stats::sorted(trace.jobs.iter().map(Job::total_demand));
    let total: f64 = ys.iter().sum();
    let top = (n / 1000).max(1);
    let top_share = ys[n - top..].iter().sum::<f64>() / total;
    let single = trace.jobs.iter().filter(|j| j.task_count() == 1).count();
    let above = ys.iter().filter(|&&y| y > moments.mean_y).count();
    let qs = [0.99, 0.999, 0.9999].map(|q| (q, stats::quantile_sorted(&ys, q)));
    Ok(TraceStats {
        moments,
        single_task_fraction: single as f64 / n as f64,
        max_tasks_per_job: trace.jobs.iter().map(Job::task_count).max().unwrap_or(0),
        top_0_1pct_load_share: top_share,
        frac_jobs_above_mean: above as f64 / n as f64,
        job_cpu_quantiles: qs,
    })
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn timestamp_display_is_exact() {
        assert_eq!(Timestamp(0).to_string(), "0");
        assert_eq!(Timestamp(2_500_000_000).to_string(), "2.5");
        assert_eq!(Timestamp(1).to_string(), "0.000000001");
        assert_eq!(Timestamp::from_secs_f64(86400.125).unwrap().to_string(), "86400.125");
        assert!(Timestamp::from_secs_f64(-1.0).is_none());
        assert!(Timestamp::from_secs_f64(f64::NAN).is_none());
    }

    #[test]
    fn job_rejects_duplicates_and_bad_demand() {
        let t = |i, z| TaskDemand { task_index: i, cpu_demand: z };
        assert!(matches!(
            Job::new("a", Timestamp::ZERO, vec![t(0, 1.0), t(0, 2.0)]),
            Err(WorkloadError::DuplicateTask { .. })
        ));
        assert!(Job::new("a", Timestamp::ZERO, vec![t(0, 0.0)]).is_err());
        assert!(Job::new("a", Timestamp::ZERO, vec![]).is_err());
        let j = Job::new("a", Timestamp::ZERO, vec![t(1, 1.0), t(0, 3.0)]).unwrap();
        assert_eq!(j.total_demand(), 4.0);
        assert_eq!(j.tasks()[0].cpu_demand, 3.0);
    }

    #[test]
    fn moments_two_jobs() {
        let m = estimate_moments(&trace_of(&[(0.0, 1.0), (2.0, 3.0)])).unwrap();
        assert_eq!(m.lambda, 0.5);
        assert_eq!(m.c_a, 0.0);
        assert_eq!(m.mean_y, 2.0);
        assert!((m.c_y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moments_equal_iats() {
        let m = estimate_moments(&trace_of(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)])).unwrap();
        assert_eq!(m.c_a, 0.0);
        assert_eq!(m.lambda, 1.0);
    }

    #[test]
    fn moments_errors() {
        assert!(matches!(
            estimate_moments(&trace_of(&[(0.0, 1.0)])),
            Err(WorkloadError::TooFewJobs { .. })
        ));
        assert!(matches!(
            estimate_moments(&trace_of(&[(1.0, 1.0), (1.0, 2.0)])),
            Err(WorkloadError::ZeroSpan)
        ));
    }

    #[test]
    fn simultaneous_arrivals_keep_input_order() {
        let tr = trace_of(&[(1.0, 1.0), (0.5, 2.0), (1.0, 3.0)]);
        let ids: Vec<_> = tr.jobs().iter().map(|j| j.job_id()).collect();
        assert_eq!(ids, ["j1", "j0", "j2"]);
    }

    #[test]
    fn stats_top_share() {
        let pts: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64, if i == 500 { 1001.0 } else { 1.0 })).collect();
        let s = trace_stats(&trace_of(&pts)).unwrap();
        assert!((s.top_0_1pct_load_share - 1001.0 / 2000.0).abs() < 1e-12);
        assert_eq!(s.single_task_fraction, 1.0);
        assert_eq!(s.job_cpu_quantiles[0].1, 1.0);
    }
}
