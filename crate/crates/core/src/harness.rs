//! Fixed-budget experiment drivers: sweeps over the number of servers,
//! per-day spreads, two-stage tuning grids and policy comparisons.
//!
//! Every grid point is independent. Points are evaluated on the current
//! rayon pool (see [`with_workers`]) and gathered back in plan order, so
//! results never depend on the worker count.

use std::collections::BTreeMap;
use std::io::{self, Write};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::{self, BoxplotStats, MetricsError};
use crate::models::{self, ClusterParams, PhiVariant, Policy};
use crate::sim::{run_sim, ClusterSpec, Granularity, SimError, SimOutput};
use crate::stats;
use crate::workload::{
    day_window, estimate_moments, quantile_task_cpu, Transform, WorkloadError, WorkloadMoments, WorkloadTrace,
    DAY_SECONDS,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unstable configuration: {0}")]
    Unstable(String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub const CSV_HEADER: &str =
    "n,policy,granularity,seed,mean_response,mean_slowdown,p_idle,model_mean_response,phi_variant,theta,n1,n2,realized_util";

/// `count` log-spaced integers over `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: u32, hi: u32, count: usize) -> Vec<u32> {
    if count <= 1 || lo >= hi {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u32> =
        (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u32).collect();
    out.dedup();
    out
}

pub fn default_n_list() -> Vec<u32> {
    log_spaced(2, 1000, 12)
}

fn default_rho0() -> f64 {
    0.8
}

fn default_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    #[serde(default)]
    pub transforms: Vec<Transform>,
    /// Seeds the transform pipeline; simulation seeds are in `seeds`.
    #[serde(default)]
    pub transform_seed: u64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u32>,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default)]
    pub variant: PhiVariant,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub include_model: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            transforms: Vec::new(),
            transform_seed: 0,
            n_list: default_n_list(),
            rho0: default_rho0(),
            policies: default_policies(),
            granularity: Granularity::Job,
            variant: PhiVariant::Canonical,
            seeds: default_seeds(),
            include_model: true,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(HarnessError::InvalidPlan("n_list must be non-empty with values >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::InvalidPlan("no policies".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidPlan("no seeds".into()));
        }
        check_rho0(self.rho0)
    }
}

fn check_rho0(rho0: f64) -> Result<()> {
    if rho0 >= 1.0 {
        return Err(HarnessError::Unstable(format!("rho0 = {rho0} >= 1")));
    }
    if !(rho0 > 0.0) {
        return Err(HarnessError::InvalidPlan(format!("rho0 must be positive, got {rho0}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub policy: Policy,
    pub granularity: Granularity,
    pub seed: u64,
    pub mu: f64,
    pub mean_response: f64,
    pub mean_slowdown: f64,
    pub p_idle: f64,
    pub model_mean_response: Option<f64>,
    pub phi_variant: Option<PhiVariant>,
    pub theta: Option<f64>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    /// Overall busy fraction across all servers.
    pub realized_util: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMeta {
    pub trace_label: String,
    pub transforms: Vec<Transform>,
    pub moments: WorkloadMoments,
    pub rho0: f64,
    /// `lambda E[Y] / rho0`, shared by every row.
    pub capacity: f64,
    pub plan_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub meta: SweepMeta,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.policy,
                r.granularity.as_str(),
                r.seed,
                r.mean_response,
                r.mean_slowdown,
                r.p_idle,
                opt(r.model_mean_response),
                opt(r.phi_variant),
                opt(r.theta),
                opt(r.n1),
                opt(r.n2),
                r.realized_util
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }

    /// Largest relative deviation of `n * mu` from the capacity budget.
    pub fn budget_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let total = r.n1.zip(r.n2).map(|(a, b)| a + b).unwrap_or(r.n);
                (total as f64 * r.mu - self.meta.capacity).abs() / self.meta.capacity
            })
            .fold(0.0, f64::max)
    }

    /// Mean, min and max of the mean response over seeds, per `(n, policy)`
    /// in first-appearance order.
    pub fn aggregate(&self) -> Vec<SeedAggregate> {
        let mut order: Vec<(u32, Policy)> = Vec::new();
        let mut groups: BTreeMap<(u32, Policy), Vec<&SweepRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.n, r.policy);
            if !groups.contains_key(&key) {
                order.push(key);
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rs = &groups[&key];
                let resp: Vec<f64> = rs.iter().map(|r| r.mean_response).collect();
                SeedAggregate {
                    n: key.0,
                    policy: key.1,
                    seeds: rs.len(),
                    mean_response: stats::mean(&resp),
                    min_response: resp.iter().cloned().fold(f64::INFINITY, f64::min),
                    max_response: resp.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    p_idle: stats::mean(&rs.iter().map(|r| r.p_idle).collect::<Vec<_>>()),
                    model_mean_response: rs[0].model_mean_response,
                }
            })
            .collect()
    }

    /// Seed-averaged mean response for one point, if present.
    pub fn mean_response(&self, n: u32, policy: Policy) -> Option<f64> {
        self.aggregate().into_iter().find(|a| a.n == n && a.policy == policy).map(|a| a.mean_response)
    }

    pub fn p_idle(&self, n: u32, policy: Policy) -> Option<f64> {
        self.aggregate().into_iter().find(|a| a.n == n && a.policy == policy).map(|a| a.p_idle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedAggregate {
    pub n: u32,
    pub policy: Policy,
    pub seeds: usize,
    pub mean_response: f64,
    pub min_response: f64,
    pub max_response: f64,
    pub p_idle: f64,
    pub model_mean_response: Option<f64>,
}

/// Runs `f` on a dedicated pool of `workers` threads (at least one).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            warn!("could not build a {workers}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

fn plan_hash<T: Serialize>(plan: &T, trace: &WorkloadTrace) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(plan).expect("plan serializes"));
    h.update(trace.label().as_bytes());
    h.update((trace.len() as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn base_params(m: &WorkloadMoments, rho0: f64) -> ClusterParams {
    ClusterParams { lambda: m.lambda, c_a: m.c_a, mean_y: m.mean_y, c_y: m.c_y, rho0, n: 1 }
}

fn overall_util(out: &SimOutput) -> f64 {
    let servers: u32 = out.stage_servers.iter().sum();
    out.busy_time.iter().sum::<f64>() / (servers as f64 * out.sim_end_time)
}

fn row_from(out: &SimOutput, spec: &ClusterSpec, n: u32) -> Result<SweepRow> {
    let s = metrics::summarize(out)?;
    let (theta, n1, n2) = match spec.topology {
        crate::sim::Topology::TwoStage { n1, n2, theta } => (Some(theta), Some(n1), Some(n2)),
        crate::sim::Topology::SingleStage { .. } => (None, None, None),
    };
    Ok(SweepRow {
        n,
        policy: spec.effective_policy(),
        granularity: spec.granularity,
        seed: spec.seed,
        mu: spec.mu,
        mean_response: s.mean_response,
        mean_slowdown: s.mean_slowdown,
        p_idle: s.p_idle_at_arrival,
        model_mean_response: None,
        phi_variant: None,
        theta,
        n1,
        n2,
        realized_util: overall_util(out),
    })
}

/// Applies the plan's transforms and sweeps every `(n, policy, seed)`.
pub fn run_sweep(trace: &WorkloadTrace, plan: &SweepPlan) -> Result<SweepTable> {
    plan.validate()?;
    let transformed = Transform::apply_all(&plan.transforms, trace, plan.transform_seed)?;
    sweep_transformed(&transformed, plan, plan_hash(plan, trace))
}

fn sweep_transformed(trace: &WorkloadTrace, plan: &SweepPlan, hash: String) -> Result<SweepTable> {
    let moments = estimate_moments(trace)?;
    let base = base_params(&moments, plan.rho0);
    base.validate().map_err(HarnessError::Model)?;
    let mut points = Vec::new();
    for &n in &plan.n_list {
        for &policy in &plan.policies {
            for &seed in &plan.seeds {
                points.push((n, policy, seed));
            }
        }
    }
    let rows: Vec<Result<SweepRow>> = points
        .par_iter()
        .map(|&(n, policy, seed)| {
            let params = base.with_n(n);
            let spec = ClusterSpec::single(n, policy, models::server_rate(&params), plan.granularity, seed);
            let out = run_sim(trace, &spec)?;
            let mut row = row_from(&out, &spec, n)?;
            if plan.include_model {
                row.model_mean_response = Some(models::mean_resp(policy, &params, plan.variant));
                row.phi_variant = Some(plan.variant);
            }
            Ok(row)
        })
        .collect();
    Ok(SweepTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
        meta: SweepMeta {
            trace_label: trace.label().to_owned(),
            transforms: plan.transforms.clone(),
            moments,
            rho0: plan.rho0,
            capacity: moments.lambda * moments.mean_y / plan.rho0,
            plan_hash: hash,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelRow {
    pub n: u32,
    pub policy: Policy,
    pub mu: f64,
    pub mean_response: f64,
    pub variant: PhiVariant,
}

/// Analytic curves at a fixed budget, `n` outermost.
pub fn model_rows(base: &ClusterParams, n_list: &[u32], policies: &[Policy], variant: PhiVariant) -> Result<Vec<ModelRow>> {
    check_rho0(base.rho0)?;
    if n_list.is_empty() || policies.is_empty() {
        return Err(HarnessError::InvalidPlan("n_list and policies must be non-empty".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for &policy in policies {
            let point = models::model_curve(base, &[n], policy, variant).map_err(HarnessError::Model)?[0];
            rows.push(ModelRow { n, policy, mu: point.mu, mean_response: point.mean_response, variant });
        }
    }
    Ok(rows)
}

/// Model rows in the sweep table layout, simulation columns left empty.
pub fn write_model_csv<W: Write>(rows: &[ModelRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},,,,,,{},{},,,,", r.n, r.policy, r.mean_response, r.variant)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadReport {
    /// Days that produced a sweep.
    pub days: Vec<u32>,
    pub skipped_days: Vec<u32>,
    /// Seed-averaged mean response for each used day, keyed by `(policy, n)`.
    pub per_day: BTreeMap<(Policy, u32), Vec<f64>>,
    pub boxplots: BTreeMap<(Policy, u32), BoxplotStats>,
}

impl SpreadReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "policy,n,days,min,q1,median,q3,max")?;
        for ((p, n), b) in &self.boxplots {
            writeln!(out, "{p},{n},{},{},{},{},{},{}", self.days.len(), b.min, b.q1, b.median, b.q3, b.max)?;
        }
        Ok(())
    }
}

/// Runs the plan on each day window separately. The transforms are applied
/// per day, after windowing.
pub fn per_day_spread(trace: &WorkloadTrace, plan: &SweepPlan) -> Result<SpreadReport> {
    plan.validate()?;
    let last = trace.jobs().last().map(|j| j.arrival_secs()).unwrap_or(0.0);
    let n_days = (last / DAY_SECONDS).floor() as u32 + 1;
    let mut report =
        SpreadReport { days: Vec::new(), skipped_days: Vec::new(), per_day: BTreeMap::new(), boxplots: BTreeMap::new() };
    for day in 0..n_days {
        let window = match day_window(trace, day) {
            Ok(w) if w.len() >= 2 => w,
            Ok(_) | Err(WorkloadError::EmptyWindow { .. }) => {
                warn!("day {day}: fewer than two jobs, skipped");
                report.skipped_days.push(day);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let table = run_sweep(&window, plan)?;
        report.days.push(day);
        for a in table.aggregate() {
            report.per_day.entry((a.policy, a.n)).or_default().push(a.mean_response);
        }
    }
    if report.days.is_empty() {
        return Err(HarnessError::InvalidPlan("every day window is empty".into()));
    }
    for (key, values) in &report.per_day {
        report.boxplots.insert(*key, metrics::boxplot_stats(values)?);
    }
    Ok(report)
}

pub fn default_theta_quantiles() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99]
}

/// `{ceil(n/10), ceil(n/4), ceil(n/2), ceil(3n/4), n-1}`, clipped to
/// `[1, n-1]` and deduplicated.
pub fn default_n1_grid(n_total: u32) -> Vec<u32> {
    let c = |num: u32, den: u32| (n_total * num).div_ceil(den);
    let mut g: Vec<u32> = [c(1, 10), c(1, 4), c(1, 2), c(3, 4), n_total.saturating_sub(1)]
        .into_iter()
        .map(|v| v.clamp(1, n_total.saturating_sub(1).max(1)))
        .collect();
    g.sort_unstable();
    g.dedup();
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunePlan {
    #[serde(default)]
    pub transforms: Vec<Transform>,
    #[serde(default)]
    pub transform_seed: u64,
    pub n_total: u32,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_theta_quantiles")]
    pub theta_quantiles: Vec<f64>,
    /// Defaults to [`default_n1_grid`].
    #[serde(default)]
    pub n1_grid: Option<Vec<u32>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl TunePlan {
    pub fn new(n_total: u32) -> TunePlan {
        TunePlan {
            transforms: Vec::new(),
            transform_seed: 0,
            n_total,
            rho0: default_rho0(),
            theta_quantiles: default_theta_quantiles(),
            n1_grid: None,
            seeds: default_seeds(),
        }
    }

    pub fn n1_values(&self) -> Vec<u32> {
        self.n1_grid.clone().unwrap_or_else(|| default_n1_grid(self.n_total))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total < 2 {
            return Err(HarnessError::InvalidPlan("two stages need n_total >= 2".into()));
        }
        if self.theta_quantiles.is_empty() || self.seeds.is_empty() || self.n1_values().is_empty() {
            return Err(HarnessError::InvalidPlan("theta_quantiles, n1_grid and seeds must be non-empty".into()));
        }
        if let Some(q) = self.theta_quantiles.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
            return Err(HarnessError::InvalidPlan(format!("theta quantile {q} outside (0, 1]")));
        }
        if let Some(n1) = self.n1_values().into_iter().find(|&v| v < 1 || v >= self.n_total) {
            return Err(HarnessError::InvalidPlan(format!("n1 = {n1} must lie in [1, {})", self.n_total)));
        }
        check_rho0(self.rho0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunePoint {
    pub theta_quantile: f64,
    pub theta: f64,
    pub n1: u32,
    pub n2: u32,
    /// Offered load per server in stage 1 and stage 2.
    pub stage_loads: [f64; 2],
    pub mean_response: f64,
}

impl TunePoint {
    pub fn is_stable(&self) -> bool {
        self.stage_loads.iter().all(|&r| r < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub best: TunePoint,
    /// One entry per `(theta, n1)` in plan order, seed-averaged.
    pub grid: Vec<TunePoint>,
    /// Every simulated row, `theta` outermost, then `n1`, then seed.
    pub table: SweepTable,
}

/// Offered per-server loads of a two-stage split, from the work each
/// stage receives over the trace span.
pub fn stage_loads(trace: &WorkloadTrace, theta: f64, n1: u32, n2: u32, mu: f64) -> [f64; 2] {
    let (mut w1, mut w2) = (0.0, 0.0);
    for t in trace.jobs().iter().flat_map(|j| j.tasks()) {
        let z = t.cpu_demand;
        if z <= theta {
            w1 += z;
        } else {
            w1 += theta;
            w2 += z;
        }
    }
    let rate = (trace.len() - 1) as f64 / trace.span_secs() / trace.len() as f64;
    [w1 * rate / (n1 as f64 * mu), w2 * rate / (n2 as f64 * mu)]
}

/// Grid search over `(theta, n1)` for a two-stage RR cluster with
/// `n1 + n2 = n_total` servers of the single-stage budget speed.
pub fn tune_two_stage(trace: &WorkloadTrace, plan: &TunePlan) -> Result<TuneResult> {
    plan.validate()?;
    let tr = Transform::apply_all(&plan.transforms, trace, plan.transform_seed)?;
    let moments = estimate_moments(&tr)?;
    let base = base_params(&moments, plan.rho0);
    base.validate().map_err(HarnessError::Model)?;
    let mu = models::server_rate(&base.with_n(plan.n_total));
    let n1s = plan.n1_values();
    let mut cells = Vec::new();
    for &q in &plan.theta_quantiles {
        let theta = quantile_task_cpu(&tr, q)?;
        for &n1 in &n1s {
            cells.push((q, theta, n1));
        }
    }
    let mut points = Vec::new();
    for &(_, theta, n1) in &cells {
        for &seed in &plan.seeds {
            points.push((theta, n1, seed));
        }
    }
    let rows: Vec<Result<SweepRow>> = points
        .par_iter()
        .map(|&(theta, n1, seed)| {
            let spec = ClusterSpec::two_stage(n1, plan.n_total - n1, theta, mu, seed);
            row_from(&run_sim(&tr, &spec)?, &spec, plan.n_total)
        })
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    let k = plan.seeds.len();
    let grid: Vec<TunePoint> = cells
        .iter()
        .zip(rows.chunks(k))
        .map(|(&(q, theta, n1), chunk)| TunePoint {
            theta_quantile: q,
            theta,
            n1,
            n2: plan.n_total - n1,
            stage_loads: stage_loads(&tr, theta, n1, plan.n_total - n1, mu),
            mean_response: chunk.iter().map(|r| r.mean_response).sum::<f64>() / k as f64,
        })
        .collect();
    let best = grid
        .iter()
        .filter(|p| p.is_stable())
        .min_by(|a, b| {
            a.mean_response
                .total_cmp(&b.mean_response)
                .then(a.theta.total_cmp(&b.theta))
                .then(a.n1.cmp(&b.n1))
        })
        .copied()
        .ok_or_else(|| {
            HarnessError::Unstable(format!(
                "every (theta, n1) split overloads a stage at n_total = {}, rho0 = {}",
                plan.n_total, plan.rho0
            ))
        })?;
    let table = SweepTable {
        rows,
        meta: SweepMeta {
            trace_label: tr.label().to_owned(),
            transforms: plan.transforms.clone(),
            moments,
            rho0: plan.rho0,
            capacity: moments.lambda * moments.mean_y / plan.rho0,
            plan_hash: plan_hash(plan, trace),
        },
    };
    Ok(TuneResult { best, grid, table })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossover {
    /// The ordering of `first` and `second` flips between `n_before` and
    /// `n_after`.
    pub n_before: u32,
    pub n_after: u32,
    pub first: Policy,
    pub second: Policy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Findings {
    /// For each n (ascending), policies from best to worst with their
    /// seed-averaged mean response.
    pub ranking: Vec<(u32, Vec<(Policy, f64)>)>,
    /// Where each policy attains its smallest mean response.
    pub minimizers: Vec<(Policy, u32, f64)>,
    pub crossovers: Vec<Crossover>,
}

impl Findings {
    /// The n values at which `a` has strictly smaller mean response than `b`.
    pub fn beats(&self, a: Policy, b: Policy) -> Vec<u32> {
        let value = |rank: &[(Policy, f64)], p: Policy| rank.iter().find(|x| x.0 == p).map(|x| x.1);
        self.ranking
            .iter()
            .filter_map(|(n, rank)| match (value(rank, a), value(rank, b)) {
                (Some(x), Some(y)) if x < y => Some(*n),
                _ => None,
            })
            .collect()
    }

    pub fn minimizer(&self, p: Policy) -> Option<u32> {
        self.minimizers.iter().find(|m| m.0 == p).map(|m| m.1)
    }
}

/// Descriptive comparison of the policies in a sweep table.
pub fn compare_policies(table: &SweepTable) -> Result<Findings> {
    let agg = table.aggregate();
    let mut by_n: BTreeMap<u32, Vec<(Policy, f64)>> = BTreeMap::new();
    for a in &agg {
        by_n.entry(a.n).or_default().push((a.policy, a.mean_response));
    }
    let mut policies: Vec<Policy> = agg.iter().map(|a| a.policy).collect();
    policies.sort();
    policies.dedup();
    if policies.len() < 2 {
        return Err(HarnessError::InvalidPlan("nothing to compare: fewer than two policies".into()));
    }
    let ranking: Vec<(u32, Vec<(Policy, f64)>)> = by_n
        .into_iter()
        .map(|(n, mut v)| {
            v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            (n, v)
        })
        .collect();
    let minimizers = policies
        .iter()
        .filter_map(|&p| {
            ranking
                .iter()
                .filter_map(|(n, r)| r.iter().find(|x| x.0 == p).map(|x| (*n, x.1)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(n, v)| (p, n, v))
        })
        .collect();
    let mut crossovers = Vec::new();
    for (i, &a) in policies.iter().enumerate() {
        for &b in &policies[i + 1..] {
            let sign = |r: &[(Policy, f64)]| {
                let x = r.iter().find(|x| x.0 == a)?.1;
                let y = r.iter().find(|x| x.0 == b)?.1;
                Some(x < y)
            };
            let mut prev: Option<(u32, bool)> = None;
            for (n, r) in &ranking {
                if let Some(s) = sign(r) {
                    if let Some((pn, ps)) = prev {
                        if ps != s {
                            crossovers.push(Crossover { n_before: pn, n_after: *n, first: a, second: b });
                        }
                    }
                    prev = Some((*n, s));
                }
            }
        }
    }
    Ok(Findings { ranking, minimizers, crossovers })
}
