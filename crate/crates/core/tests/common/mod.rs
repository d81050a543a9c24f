#![allow(dead_code)]

use dispatchsim::{Job, TaskDemand, Timestamp, WorkloadTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Job-level trace from `(arrival secs, demand)` pairs.
pub fn job_trace(points: &[(f64, f64)]) -> WorkloadTrace {
    let jobs = points
        .iter()
        .enumerate()
        .map(|(i, &(t, y))| {
            Job::new(format!("j{i}"), Timestamp::from_secs_f64(t).unwrap(), vec![TaskDemand { task_index: 0, cpu_demand: y }])
                .unwrap()
        })
        .collect();
    WorkloadTrace::new(jobs, 0.0, "test").unwrap()
}

/// Task-level trace from `(arrival secs, task demands)`.
pub fn task_trace(points: &[(f64, Vec<f64>)]) -> WorkloadTrace {
    let jobs = points
        .iter()
        .enumerate()
        .map(|(i, (t, zs))| {
            let tasks = zs.iter().enumerate().map(|(k, &z)| TaskDemand { task_index: k as u32, cpu_demand: z }).collect();
            Job::new(format!("j{i}"), Timestamp::from_secs_f64(*t).unwrap(), tasks).unwrap()
        })
        .collect();
    WorkloadTrace::new(jobs, 0.0, "test").unwrap()
}

/// Central FCFS queue feeding `n` servers: job k starts at the later of its
/// arrival and the earliest server release.
pub fn central_queue_responses(trace: &WorkloadTrace, n: usize, mu: f64) -> Vec<f64> {
    let mut free = vec![0.0f64; n];
    trace
        .jobs()
        .iter()
        .map(|job| {
            let a = job.arrival_secs();
            let (i, _) = free.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap();
            let end = free[i].max(a) + job.total_demand() / mu;
            free[i] = end;
            end - a
        })
        .collect()
}

/// Small random job-level instance with coarse arrivals so that ties occur.
pub fn micro_instance(seed: u64) -> (WorkloadTrace, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4u32);
    let jobs = rng.random_range(1..=20usize);
    let mut t = 0.0;
    let points: Vec<(f64, f64)> = (0..jobs)
        .map(|_| {
            if rng.random_bool(0.7) {
                t += rng.random_range(0..8u32) as f64 * 0.25;
            }
            (t, rng.random_range(1..40u32) as f64 * 0.125)
        })
        .collect();
    (job_trace(&points), n)
}
