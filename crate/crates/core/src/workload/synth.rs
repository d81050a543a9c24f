//! Seeded synthetic workload generator.
//!
//! Jobs arrive from a renewal process. Each job is either a resubmission
//! of the previous job's demand profile, a "monster" (many tasks sharing a
//! per-job scale factor, so task demands are correlated within the job),
//! a single-task job, or an ordinary multi-task job.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Job, Result, TaskDemand, Timestamp, WorkloadError, WorkloadTrace};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IatDist {
    Exponential { mean: f64 },
    /// Parameterised by mean and coefficient of variation.
    LogNormal { mean: f64, cov: f64 },
    Deterministic { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProcess {
    Poisson { rate: f64 },
    Renewal { iat: IatDist },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountDist {
    Fixed { count: u32 },
    /// `min + Geometric`, with the given overall mean (> min).
    Geometric { min: u32, mean: f64 },
    /// Log-uniform over the integers `[min, max]`.
    LogUniform { min: u32, max: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CpuDist {
    Exponential { mean: f64 },
    /// Pareto with shape `alpha` truncated to `[low, high]`.
    BoundedPareto { alpha: f64, low: f64, high: f64 },
    /// `exp(N(mu, sigma^2))`.
    LogNormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskCountDist {
    /// Probability that a non-monster job has exactly one task.
    pub single_task_prob: f64,
    /// Task count of the remaining non-monster jobs.
    pub multi: CountDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonsterSpec {
    pub fraction: f64,
    pub tasks: CountDist,
    /// Per-job demand multiplier, log-uniform over `[scale_min, scale_max]`.
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for MonsterSpec {
    fn default() -> Self {
        MonsterSpec { fraction: 0.0, tasks: CountDist::Fixed { count: 1 }, scale_min: 1.0, scale_max: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Jobs are generated while their arrival time is below this, seconds.
    pub duration: f64,
    pub arrival: ArrivalProcess,
    pub task_count: TaskCountDist,
    pub task_cpu: CpuDist,
    #[serde(default)]
    pub monster: MonsterSpec,
    /// Probability that a job repeats the previous job's task demands.
    #[serde(default)]
    pub repeat_prob: f64,
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> WorkloadError {
    WorkloadError::InvalidParameter(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn log_uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

impl IatDist {
    fn validate(&self) -> Result<()> {
        match *self {
            IatDist::Exponential { mean } => positive("iat mean", mean),
            IatDist::LogNormal { mean, cov } => {
                positive("iat mean", mean)?;
                positive("iat cov", cov)
            }
            IatDist::Deterministic { value } => positive("iat value", value),
        }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            IatDist::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            IatDist::LogNormal { mean, cov } => {
                let s2 = (1.0 + cov * cov).ln();
                LogNormal::new(mean.ln() - s2 / 2.0, s2.sqrt()).unwrap().sample(rng)
            }
            IatDist::Deterministic { value } => value,
        }
    }
}

impl ArrivalProcess {
    fn iat(&self) -> IatDist {
        match *self {
            ArrivalProcess::Poisson { rate } => IatDist::Exponential { mean: 1.0 / rate },
            ArrivalProcess::Renewal { iat } => iat,
        }
    }
}

impl CountDist {
    fn validate(&self) -> Result<()> {
        match *self {
            CountDist::Fixed { count } if count >= 1 => Ok(()),
            CountDist::Geometric { min, mean } if min >= 1 && mean > min as f64 && mean.is_finite() => Ok(()),
            CountDist::LogUniform { min, max } if min >= 1 && max >= min => Ok(()),
            other => Err(invalid(format!("invalid task count distribution {other:?}"))),
        }
    }

    fn sample(&self, rng: &mut SimRng) -> u32 {
        match *self {
            CountDist::Fixed { count } => count,
            CountDist::Geometric { min, mean } => {
                let p = 1.0 / (mean - min as f64 + 1.0);
                let extra = Geometric::new(p).unwrap().sample(rng);
                min.saturating_add(extra.min(u32::MAX as u64) as u32)
            }
            CountDist::LogUniform { min, max } => {
                let x = log_uniform(rng, min as f64, max as f64 + 1.0).floor() as u32;
                x.clamp(min, max)
            }
        }
    }
}

impl CpuDist {
    fn validate(&self) -> Result<()> {
        match *self {
            CpuDist::Exponential { mean } => positive("cpu mean", mean),
            CpuDist::BoundedPareto { alpha, low, high } => {
                positive("pareto alpha", alpha)?;
                positive("pareto low", low)?;
                positive("pareto high", high)?;
                if low < high {
                    Ok(())
                } else {
                    Err(invalid(format!("pareto low {low} must be below high {high}")))
                }
            }
            CpuDist::LogNormal { mu, sigma } => {
                if mu.is_finite() && sigma.is_finite() && sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("invalid lognormal ({mu}, {sigma})")))
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            CpuDist::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            CpuDist::BoundedPareto { alpha, low, high } => {
                // inverse CDF
                let u: f64 = rng.random();
                let ratio = (low / high).powf(alpha);
                low * (1.0 - u * (1.0 - ratio)).powf(-1.0 / alpha)
            }
            CpuDist::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).unwrap().sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CpuDist::Exponential { mean } => mean,
            CpuDist::BoundedPareto { alpha, low, high } => {
                let norm = 1.0 - (low / high).powf(alpha);
                if (alpha - 1.0).abs() < 1e-12 {
                    low * (high / low).ln() / norm
                } else {
                    alpha * low.powf(alpha) * (low.powf(1.0 - alpha) - high.powf(1.0 - alpha)) / ((alpha - 1.0) * norm)
                }
            }
            CpuDist::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        positive("duration", self.duration)?;
        match self.arrival {
            ArrivalProcess::Poisson { rate } => positive("arrival rate", rate)?,
            ArrivalProcess::Renewal { iat } => iat.validate()?,
        }
        probability("single_task_prob", self.task_count.single_task_prob)?;
        self.task_count.multi.validate()?;
        self.task_cpu.validate()?;
        probability("monster fraction", self.monster.fraction)?;
        probability("repeat_prob", self.repeat_prob)?;
        if self.monster.fraction > 0.0 {
            self.monster.tasks.validate()?;
            positive("monster scale_min", self.monster.scale_min)?;
            positive("monster scale_max", self.monster.scale_max)?;
            if self.monster.scale_min > self.monster.scale_max {
                return Err(invalid("monster scale_min exceeds scale_max"));
            }
        }
        Ok(())
    }

    /// Heavy-tailed surrogate of a production day: ~96.6% single-task jobs,
    /// 99% of jobs under about 30 s and 99.9% under about 450 s, with the
    /// largest 0.1% (monster jobs) carrying about two thirds of the load.
    /// Mean job demand is about 6.5 s at about 1.6 jobs/s.
    pub fn calibrated(duration: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            duration,
            arrival: ArrivalProcess::Renewal { iat: IatDist::LogNormal { mean: 0.625, cov: 1.5 } },
            task_count: TaskCountDist {
                single_task_prob: 0.967,
                multi: CountDist::Geometric { min: 2, mean: 8.0 },
            },
            task_cpu: CpuDist::BoundedPareto { alpha: 1.2, low: 0.4, high: 500.0 },
            monster: MonsterSpec {
                fraction: 0.001,
                tasks: CountDist::LogUniform { min: 100, max: 2000 },
                scale_min: 1.0,
                scale_max: 10.0,
            },
            repeat_prob: 0.5,
            seed,
        }
    }

    /// Light-tailed single-task traffic plus monster jobs: 1.2% of jobs carry
    /// 100 to 300 tasks sharing a heavy scale factor, about 96% of the work.
    pub fn monster(duration: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            duration,
            arrival: ArrivalProcess::Poisson { rate: 1.0 },
            task_count: TaskCountDist {
                single_task_prob: 0.98,
                multi: CountDist::Geometric { min: 2, mean: 5.0 },
            },
            task_cpu: CpuDist::Exponential { mean: 1.0 },
            monster: MonsterSpec {
                fraction: 0.012,
                tasks: CountDist::LogUniform { min: 100, max: 300 },
                scale_min: 8.0,
                scale_max: 32.0,
            },
            repeat_prob: 0.0,
            seed,
        }
    }

    /// Poisson arrivals of single-task jobs with exponential demand.
    pub fn markovian(rate: f64, mean_demand: f64, duration: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            duration,
            arrival: ArrivalProcess::Poisson { rate },
            task_count: TaskCountDist { single_task_prob: 1.0, multi: CountDist::Fixed { count: 2 } },
            task_cpu: CpuDist::Exponential { mean: mean_demand },
            monster: MonsterSpec::default(),
            repeat_prob: 0.0,
            seed,
        }
    }
}

/// Generates the trace described by `spec`. Arrivals and demands are drawn
/// from independent sub-streams of `spec.seed`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<WorkloadTrace> {
    spec.validate()?;
    let mut arrivals_rng = rng_from_seed(derive_seed(spec.seed, 0));
    let mut sizes_rng = rng_from_seed(derive_seed(spec.seed, 1));
    let iat = spec.arrival.iat();

    let mut jobs = Vec::new();
    let mut t = iat.sample(&mut arrivals_rng);
    let mut previous: Option<Vec<f64>> = None;
    while t < spec.duration {
        let rng = &mut sizes_rng;
        let demands = match previous.take() {
            Some(prev) if spec.repeat_prob > 0.0 && rng.random::<f64>() < spec.repeat_prob => prev,
            _ => draw_job(spec, rng),
        };
        let tasks = demands
            .iter()
            .enumerate()
            .map(|(k, &z)| TaskDemand { task_index: k as u32, cpu_demand: z })
            .collect();
        let arrival = Timestamp::from_secs_f64(t).expect("finite arrival");
        jobs.push(Job::from_sorted_tasks(format!("j{}", jobs.len()), arrival, tasks));
        previous = Some(demands);
        t += iat.sample(&mut arrivals_rng);
    }
    if jobs.is_empty() {
        return Err(WorkloadError::Empty);
    }
    let label = format!("synthetic:{}", serde_json::to_string(spec).expect("spec serializes"));
    WorkloadTrace::new(jobs, 0.0, label)
}

fn draw_job(spec: &SynthSpec, rng: &mut SimRng) -> Vec<f64> {
    let positive_draw = |rng: &mut SimRng| loop {
        let z = spec.task_cpu.sample(rng);
        if z > 0.0 && z.is_finite() {
            break z;
        }
    };
    if spec.monster.fraction > 0.0 && rng.random::<f64>() < spec.monster.fraction {
        let count = spec.monster.tasks.sample(rng);
        let scale = log_uniform(rng, spec.monster.scale_min, spec.monster.scale_max);
        return (0..count).map(|_| scale * positive_draw(rng)).collect();
    }
    let count = if rng.random::<f64>() < spec.task_count.single_task_prob {
        1
    } else {
        spec.task_count.multi.sample(rng)
    };
    (0..count).map(|_| positive_draw(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::{estimate_moments, job_level_view, trace_stats, write_trace};
    use super::*;

    #[test]
    fn markovian_moments() {
        let tr = generate_synthetic(&SynthSpec::markovian(1.0, 1.0, 10_000.0, 17)).unwrap();
        assert!((9_000..11_000).contains(&tr.len()));
        let m = estimate_moments(&tr).unwrap();
        assert!((m.lambda - 1.0).abs() < 0.05, "{m:?}");
        assert!((m.c_a - 1.0).abs() < 0.05, "{m:?}");
        assert!((m.c_y - 1.0).abs() < 0.05, "{m:?}");
        assert!(tr.is_job_level());
    }

    #[test]
    fn poisson_rate_estimate() {
        let tr = generate_synthetic(&SynthSpec::markovian(2.0, 1.0, 50_000.0, 3)).unwrap();
        let m = estimate_moments(&tr).unwrap();
        assert!(tr.len() >= 95_000);
        assert!((m.lambda - 2.0).abs() < 0.06, "{m:?}");
        assert!((m.c_a - 1.0).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec::calibrated(2_000.0, 8);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_trace(&generate_synthetic(&spec).unwrap(), &mut a).unwrap();
        write_trace(&generate_synthetic(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let other = SynthSpec { seed: 9, ..spec };
        let mut c = Vec::new();
        write_trace(&generate_synthetic(&other).unwrap(), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn no_monsters_means_base_counts() {
        let mut spec = SynthSpec::calibrated(5_000.0, 2);
        spec.monster.fraction = 0.0;
        spec.task_count.multi = CountDist::Fixed { count: 3 };
        spec.repeat_prob = 0.0;
        let tr = generate_synthetic(&spec).unwrap();
        assert!(tr.jobs().iter().all(|j| j.task_count() == 1 || j.task_count() == 3));
    }

    #[test]
    fn job_level_view_on_synthetic_keeps_work() {
        let tr = generate_synthetic(&SynthSpec::calibrated(700.0, 5)).unwrap();
        assert!(tr.len() >= 1000);
        let direct: f64 = tr.jobs().iter().flat_map(|j| j.tasks().iter().map(|t| t.cpu_demand)).sum();
        let jl = job_level_view(&tr).total_demand();
        assert!((direct - jl).abs() <= 1e-9 * direct);
        assert_eq!(job_level_view(&tr).len(), tr.len());
    }

    #[test]
    fn calibrated_preset_hits_targets() {
        let tr = generate_synthetic(&SynthSpec::calibrated(86_400.0, 1)).unwrap();
        let s = trace_stats(&tr).unwrap();
        assert!((s.single_task_fraction - 0.966).abs() <= 0.02, "{s:?}");
        assert!(s.top_0_1pct_load_share >= 0.5, "{s:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut spec = SynthSpec::calibrated(100.0, 1);
        spec.task_cpu = CpuDist::BoundedPareto { alpha: 1.2, low: 5.0, high: 1.0 };
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = SynthSpec::calibrated(100.0, 1);
        spec.task_count.single_task_prob = 1.5;
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = SynthSpec::markovian(1.0, 1.0, 100.0, 1);
        spec.arrival = ArrivalProcess::Poisson { rate: 0.0 };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn bounded_pareto_mean_matches_samples() {
        let d = CpuDist::BoundedPareto { alpha: 1.5, low: 1.0, high: 50.0 };
        let mut rng = rng_from_seed(4);
        let n = 400_000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - d.mean()).abs() / d.mean() < 0.01, "{m} vs {}", d.mean());
        let mut rng = rng_from_seed(5);
        assert!((0..10_000).map(|_| d.sample(&mut rng)).all(|z| (1.0..=50.0).contains(&z)));
    }
}
