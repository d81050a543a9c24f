//! Trace transformations: windowing, aggregation, shuffles and outlier
//! removal. All of them return new traces.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Job, Result, TaskDemand, Timestamp, WorkloadError, WorkloadTrace};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats;

pub const DAY_SECONDS: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpuShuffleLevel {
    /// Permute job totals of a job-level trace.
    Job,
    /// Permute all task demands, keeping each job's task count.
    Task,
}

/// One step of a transformation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawTransform")]
pub enum Transform {
    ShuffleIat,
    ShuffleCpu { level: CpuShuffleLevel },
    StripOutliers { q: f64 },
    JobLevelView,
}

// serde ignores extra keys on unit variants of tagged enums, so parse a flat
// form and reject keys that do not belong to the kind.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    kind: String,
    level: Option<CpuShuffleLevel>,
    q: Option<f64>,
}

impl TryFrom<RawTransform> for Transform {
    type Error = String;

    fn try_from(r: RawTransform) -> std::result::Result<Self, String> {
        let t = match (r.kind.as_str(), r.level, r.q) {
            ("shuffle_iat", None, None) => Transform::ShuffleIat,
            ("job_level_view", None, None) => Transform::JobLevelView,
            ("shuffle_cpu", Some(level), None) => Transform::ShuffleCpu { level },
            ("strip_outliers", None, q) => Transform::StripOutliers { q: q.unwrap_or(0.999) },
            ("shuffle_iat" | "job_level_view" | "shuffle_cpu" | "strip_outliers", _, _) => {
                return Err(format!("wrong keys for transform `{}`", r.kind))
            }
            (k, _, _) => return Err(format!("unknown transform kind `{k}`")),
        };
        Ok(t)
    }
}

impl Transform {
    /// Applies the step. `seed` is only consumed by the shuffles.
    pub fn apply(&self, trace: &WorkloadTrace, seed: u64) -> Result<WorkloadTrace> {
        match *self {
            Transform::ShuffleIat => shuffle_iat(trace, seed),
            Transform::ShuffleCpu { level } => shuffle_cpu(trace, seed, level),
            Transform::StripOutliers { q } => strip_outliers(trace, q),
            Transform::JobLevelView => Ok(job_level_view(trace)),
        }
    }

    /// Applies `steps` in order; step `i` uses `derive_seed(seed, i)`.
    pub fn apply_all(steps: &[Transform], trace: &WorkloadTrace, seed: u64) -> Result<WorkloadTrace> {
        let mut current = trace.clone();
        for (i, step) in steps.iter().enumerate() {
            current = step.apply(&current, derive_seed(seed, i as u64))?;
        }
        Ok(current)
    }
}

/// Jobs with `start <= arrival < end`, re-based so that `start` maps to 0.
pub fn slice_window(trace: &WorkloadTrace, start: f64, end: f64) -> Result<WorkloadTrace> {
    if !(start < end) || start < 0.0 {
        return Err(WorkloadError::InvalidParameter(format!("window [{start}, {end}) is empty or negative")));
    }
    let lo = Timestamp::from_secs_f64(start).ok_or(WorkloadError::InvalidParameter("window start".into()))?;
    let hi = Timestamp::from_secs_f64(end).unwrap_or(Timestamp(u64::MAX));
    let jobs: Vec<Job> = trace
        .jobs()
        .iter()
        .filter(|j| j.arrival() >= lo && j.arrival() < hi)
        .map(|j| Job { arrival: Timestamp(j.arrival().0 - lo.0), ..j.clone() })
        .collect();
    if jobs.is_empty() {
        return Err(WorkloadError::EmptyWindow { start, end });
    }
    WorkloadTrace::new(jobs, trace.origin_time() + start, format!("{}|window[{start},{end})", trace.label()))
}

/// Day `d` is the window `[d * 86400, (d + 1) * 86400)`.
pub fn day_window(trace: &WorkloadTrace, day: u32) -> Result<WorkloadTrace> {
    let start = day as f64 * DAY_SECONDS;
    slice_window(trace, start, start + DAY_SECONDS)
}

/// Collapses every job into one task carrying its total demand.
pub fn job_level_view(trace: &WorkloadTrace) -> WorkloadTrace {
    let jobs = trace
        .jobs()
        .iter()
        .map(|j| {
            Job::from_sorted_tasks(
                j.job_id().to_owned(),
                j.arrival(),
                vec![TaskDemand { task_index: 0, cpu_demand: j.total_demand() }],
            )
        })
        .collect();
    WorkloadTrace {
        jobs,
        origin_time: trace.origin_time(),
        label: format!("{}|job_level", trace.label()),
    }
}

/// Randomly permutes the inter-arrival times, keeping the first arrival
/// and every job's demands in place.
pub fn shuffle_iat(trace: &WorkloadTrace, seed: u64) -> Result<WorkloadTrace> {
    if trace.len() < 2 {
        return Err(WorkloadError::TooFewJobs { needed: 2, found: trace.len() });
    }
    let mut iats = trace.iat_nanos();
    iats.shuffle(&mut rng_from_seed(seed));
    let mut t = trace.jobs()[0].arrival().0;
    let mut jobs = Vec::with_capacity(trace.len());
    jobs.push(trace.jobs()[0].clone());
    for (job, iat) in trace.jobs()[1..].iter().zip(iats) {
        t += iat;
        jobs.push(Job { arrival: Timestamp(t), ..job.clone() });
    }
    Ok(WorkloadTrace {
        jobs,
        origin_time: trace.origin_time(),
        label: format!("{}|shuffle_iat(seed={seed})", trace.label()),
    })
}

/// Randomly permutes CPU demands while leaving arrival times untouched.
pub fn shuffle_cpu(trace: &WorkloadTrace, seed: u64, level: CpuShuffleLevel) -> Result<WorkloadTrace> {
    let mut rng = rng_from_seed(seed);
    let jobs = match level {
        CpuShuffleLevel::Job => {
            if !trace.is_job_level() {
                return Err(WorkloadError::NotJobLevel);
            }
            let mut demands: Vec<f64> = trace.jobs().iter().map(Job::total_demand).collect();
            demands.shuffle(&mut rng);
            trace
                .jobs()
                .iter()
                .zip(demands)
                .map(|(j, y)| {
                    let task = TaskDemand { task_index: j.tasks()[0].task_index, cpu_demand: y };
                    Job::from_sorted_tasks(j.job_id().to_owned(), j.arrival(), vec![task])
                })
                .collect()
        }
        CpuShuffleLevel::Task => {
            let mut demands: Vec<f64> =
                trace.jobs().iter().flat_map(|j| j.tasks().iter().map(|t| t.cpu_demand)).collect();
            demands.shuffle(&mut rng);
            let mut pool = demands.into_iter();
            trace
                .jobs()
                .iter()
                .map(|j| {
                    let tasks = j
                        .tasks()
                        .iter()
                        .map(|t| TaskDemand { task_index: t.task_index, cpu_demand: pool.next().unwrap() })
                        .collect();
                    Job::from_sorted_tasks(j.job_id().to_owned(), j.arrival(), tasks)
                })
                .collect()
        }
    };
    let tag = match level {
        CpuShuffleLevel::Job => "job",
        CpuShuffleLevel::Task => "task",
    };
    Ok(WorkloadTrace {
        jobs,
        origin_time: trace.origin_time(),
        label: format!("{}|shuffle_cpu({tag},seed={seed})", trace.label()),
    })
}

/// Removes jobs whose total demand is strictly larger than the
/// nearest-rank `q` quantile of job demands.
pub fn strip_outliers(trace: &WorkloadTrace, q: f64) -> Result<WorkloadTrace> {
    if !(q > 0.0 && q < 1.0) {
        return Err(WorkloadError::InvalidParameter(format!("outlier quantile {q} outside (0, 1)")));
    }
    let ys = stats::sorted(trace.jobs().iter().map(Job::total_demand));
    let threshold = stats::quantile_sorted(&ys, q);
    let kept: Vec<Job> = trace.jobs().iter().filter(|j| j.total_demand() <= threshold).cloned().collect();
    let removed = trace.len() - kept.len();
    trace.with_jobs(kept, format!("{}|strip_outliers(q={q},removed={removed})", trace.label()))
}

/// Nearest-rank quantile over the multiset of all task demands.
pub fn quantile_task_cpu(trace: &WorkloadTrace, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(WorkloadError::InvalidParameter(format!("quantile {q} outside (0, 1]")));
    }
    let zs = stats::sorted(trace.jobs().iter().flat_map(|j| j.tasks().iter().map(|t| t.cpu_demand)));
    Ok(stats::quantile_sorted(&zs, q))
}
