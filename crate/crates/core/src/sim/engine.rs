use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::dispatch::{Dispatcher, Pool};
use super::{two_stage_step, ClusterSpec, Granularity, JobRecord, SimError, SimOutput, StageOutcome, Topology};
use crate::rng::derive_seed;
use crate::workload::WorkloadTrace;

/// One dispatch decision, recorded by [`run_sim_traced`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub job: u32,
    pub task: u32,
    pub stage: u8,
    pub server: u32,
    pub time: f64,
    pub server_was_idle: bool,
    /// Whether any server of the stage was idle right before the decision.
    pub any_idle_before: bool,
}

struct Unit {
    job: u32,
    task: u32,
    demand: f64,
}

/// Service end at `server` of `stage`. Ordered for a min-heap on
/// `(time, seq)`.
struct Event {
    time: f64,
    seq: u64,
    stage: u8,
    server: u32,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Engine {
    mu: f64,
    theta: Option<f64>,
    pools: Vec<Pool>,
    dispatchers: Vec<Dispatcher>,
    units: Vec<Unit>,
    remaining: Vec<u32>,
    completion: Vec<f64>,
    heap: BinaryHeap<Event>,
    seq: u64,
    events: u64,
    migrations: u64,
    log: Option<Vec<Assignment>>,
}

impl Engine {
    fn service_time(&self, unit: u32, stage: u8) -> f64 {
        let demand = self.units[unit as usize].demand;
        match (self.theta, stage) {
            (Some(theta), 0) => match two_stage_step(demand, theta, self.mu).expect("theta validated") {
                StageOutcome::CompletedInStage1 { service } => service,
                StageOutcome::MigrateToStage2 { timeout, .. } => timeout,
            },
            _ => demand / self.mu,
        }
    }

    fn schedule(&mut self, time: f64, stage: u8, server: u32) {
        self.heap.push(Event { time, seq: self.seq, stage, server });
        self.seq += 1;
    }

    fn dispatch(&mut self, stage: u8, unit: u32, now: f64) {
        let any_idle_before = self.pools[stage as usize].any_idle();
        let server = self.dispatchers[stage as usize].select(&self.pools[stage as usize]);
        let s = self.service_time(unit, stage);
        let pool = &mut self.pools[stage as usize];
        let was_idle = pool.is_idle(server);
        if let Some(log) = self.log.as_mut() {
            let u = &self.units[unit as usize];
            log.push(Assignment {
                job: u.job,
                task: u.task,
                stage,
                server,
                time: now,
                server_was_idle: was_idle,
                any_idle_before,
            });
        }
        if was_idle {
            let srv = &mut pool.servers[server as usize];
            srv.in_service = Some(unit);
            srv.busy_time += s;
            pool.mark_busy(server, now + s);
            self.schedule(now + s, stage, server);
        } else {
            let free_at = pool.servers[server as usize].free_at;
            pool.servers[server as usize].queue.push_back(unit);
            pool.mark_busy(server, free_at.max(now) + s);
        }
    }

    fn service_end(&mut self, ev: Event) -> Result<(), SimError> {
        let now = ev.time;
        let unit = self.pools[ev.stage as usize].servers[ev.server as usize]
            .in_service
            .take()
            .ok_or_else(|| SimError::Internal(format!("service end on idle server {}", ev.server)))?;

        let demand = self.units[unit as usize].demand;
        match self.theta {
            Some(theta) if ev.stage == 0 && demand > theta => {
                self.migrations += 1;
                self.dispatch(1, unit, now);
            }
            _ => {
                let job = self.units[unit as usize].job as usize;
                self.remaining[job] -= 1;
                if self.remaining[job] == 0 {
                    self.completion[job] = now;
                }
            }
        }

        let next = self.pools[ev.stage as usize].servers[ev.server as usize].queue.pop_front();
        match next {
            Some(u) => {
                let s = self.service_time(u, ev.stage);
                let srv = &mut self.pools[ev.stage as usize].servers[ev.server as usize];
                srv.in_service = Some(u);
                srv.busy_time += s;
                self.schedule(now + s, ev.stage, ev.server);
            }
            None => {
                self.pools[ev.stage as usize].mark_idle(ev.server);
                self.dispatchers[ev.stage as usize].notify_idle(ev.server)?;
            }
        }
        Ok(())
    }

    fn drain_until(&mut self, limit: f64) -> Result<(), SimError> {
        while self.heap.peek().is_some_and(|e| e.time <= limit) {
            let ev = self.heap.pop().unwrap();
            self.events += 1;
            self.service_end(ev)?;
        }
        Ok(())
    }
}

/// Simulates `trace` on the cluster described by `spec` until every job
/// has completed.
pub fn run_sim(trace: &WorkloadTrace, spec: &ClusterSpec) -> Result<SimOutput, SimError> {
    simulate(trace, spec, false).map(|(out, _)| out)
}

/// As [`run_sim`], additionally returning every dispatch decision.
pub fn run_sim_traced(trace: &WorkloadTrace, spec: &ClusterSpec) -> Result<(SimOutput, Vec<Assignment>), SimError> {
    simulate(trace, spec, true).map(|(out, log)| (out, log.unwrap_or_default()))
}

fn simulate(trace: &WorkloadTrace, spec: &ClusterSpec, traced: bool) -> Result<(SimOutput, Option<Vec<Assignment>>), SimError> {
    spec.validate()?;
    let sizes = spec.topology.stage_sizes();
    let theta = match spec.topology {
        Topology::TwoStage { theta, .. } => Some(theta),
        Topology::SingleStage { .. } => None,
    };
    let policy = spec.effective_policy();

    let mut units = Vec::with_capacity(trace.len());
    let mut first_unit = Vec::with_capacity(trace.len() + 1);
    let mut remaining = Vec::with_capacity(trace.len());
    for (j, job) in trace.jobs().iter().enumerate() {
        first_unit.push(units.len() as u32);
        match spec.granularity {
            Granularity::Job => units.push(Unit { job: j as u32, task: 0, demand: job.total_demand() }),
            Granularity::Task => units.extend(
                job.tasks().iter().map(|t| Unit { job: j as u32, task: t.task_index, demand: t.cpu_demand }),
            ),
        }
        remaining.push(units.len() as u32 - first_unit[j]);
    }
    first_unit.push(units.len() as u32);

    let mut engine = Engine {
        mu: spec.mu,
        theta,
        pools: sizes.iter().map(|&n| Pool::new(n)).collect(),
        dispatchers: sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| Dispatcher::new(policy, n, derive_seed(spec.seed, k as u64)))
            .collect(),
        units,
        remaining,
        completion: vec![f64::NAN; trace.len()],
        heap: BinaryHeap::new(),
        seq: 0,
        events: 0,
        migrations: 0,
        log: traced.then(Vec::new),
    };

    let mut idle_obs = Vec::with_capacity(trace.len());
    for (j, job) in trace.jobs().iter().enumerate() {
        let now = job.arrival_secs();
        engine.drain_until(now)?;
        engine.events += 1;
        idle_obs.push(engine.pools[0].any_idle());
        for unit in first_unit[j]..first_unit[j + 1] {
            engine.dispatch(0, unit, now);
        }
    }
    engine.drain_until(f64::INFINITY)?;

    let records: Vec<JobRecord> = trace
        .jobs()
        .iter()
        .zip(&engine.completion)
        .map(|(job, &completion)| {
            let arrival = job.arrival_secs();
            let response = completion - arrival;
            JobRecord {
                job_id: job.job_id().to_owned(),
                arrival,
                completion,
                total_demand: job.total_demand(),
                response,
                slowdown: response / (job.total_demand() / spec.mu),
            }
        })
        .collect();
    let sim_end_time = records.iter().map(|r| r.completion).fold(0.0, f64::max);

    let out = SimOutput {
        records,
        arrival_idle_observations: idle_obs,
        event_count: engine.events,
        sim_end_time,
        busy_time: engine.pools.iter().map(Pool::busy_time).collect(),
        stage_servers: sizes,
        idle_messages: engine.dispatchers.iter().map(Dispatcher::messages).sum(),
        migrations: engine.migrations,
    };
    Ok((out, engine.log))
}
