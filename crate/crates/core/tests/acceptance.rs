//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Set `DISPATCHSIM_TRACE` to a task CSV of the public cluster trace to run
//! the trace-driven tier (criterion 12); it is skipped otherwise.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use dispatchsim::harness::{run_sweep, tune_two_stage, SweepPlan, SweepTable, TunePlan};
use dispatchsim::models::{erlang_b, erlang_c, mean_resp, server_rate};
use dispatchsim::sim::{least_work_choices, min_after_assignment};
use dispatchsim::workload::{
    day_window, generate_synthetic, read_trace_file, trace_stats, write_trace, CpuShuffleLevel, SynthSpec, Transform,
};
use dispatchsim::{run_sim, summarize, ClusterParams, ClusterSpec, Granularity, PhiVariant, Policy, WorkloadTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// CSV outputs kept for the determinism re-run.
#[derive(Default)]
struct Outputs {
    csv: BTreeMap<&'static str, String>,
}

fn c1() -> Verdict {
    let mut worst = 0.0f64;
    for m in 0..=20u32 {
        for step in 1..=200 {
            let a = step as f64 * 0.1;
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..=m {
                term *= a / k as f64;
                sum += term;
            }
            worst = worst.max(rel(erlang_b(m, a), term / sum));
        }
    }
    let spots = [
        (erlang_b(0, 3.7), 1.0),
        (erlang_b(1, 1.0), 0.5),
        (erlang_b(2, 1.0), 0.2),
        (erlang_c(1, 0.8).unwrap(), 0.8),
        (erlang_c(2, 1.0).unwrap(), 1.0 / 3.0),
    ];
    let spots_ok = spots.iter().all(|&(got, want)| rel(got, want) < 1e-12);
    check(worst < 1e-10 && spots_ok, format!("max relative error vs direct sum {worst:.2e}, spot values ok={spots_ok}"))
}

fn markovian_trace() -> WorkloadTrace {
    generate_synthetic(&SynthSpec::markovian(0.8, 1.0, 1_260_000.0, 11)).unwrap()
}

fn mm_params(n: u32) -> ClusterParams {
    ClusterParams { lambda: 0.8, c_a: 1.0, mean_y: 1.0, c_y: 1.0, rho0: 0.8, n }
}

fn c2(trace: &WorkloadTrace) -> Verdict {
    let model = mean_resp(Policy::RR, &mm_params(1), PhiVariant::Canonical);
    let mut detail = format!("{} jobs, model {model:.6}", trace.len());
    let mut ok = trace.len() >= 1_000_000 && (model - 5.0).abs() < 1e-9;
    for p in Policy::ALL {
        let s = summarize(&run_sim(trace, &ClusterSpec::single(1, p, 1.0, Granularity::Job, 1)).unwrap()).unwrap();
        ok &= rel(s.mean_response, 5.0) <= 0.03;
        detail += &format!(", {p} {:.4} ({:+.2}%)", s.mean_response, 100.0 * (s.mean_response / 5.0 - 1.0));
    }
    check(ok, detail)
}

fn c3(trace: &WorkloadTrace) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2u32, 10] {
        let params = mm_params(n);
        let model = mean_resp(Policy::LWL, &params, PhiVariant::Canonical);
        let spec = ClusterSpec::single(n, Policy::LWL, server_rate(&params), Granularity::Job, 1);
        let sim = summarize(&run_sim(trace, &spec).unwrap()).unwrap().mean_response;
        ok &= rel(sim, model) <= 0.03;
        parts.push(format!("n={n} sim {sim:.4} model {model:.4} ({:+.2}%)", 100.0 * (sim / model - 1.0)));
    }
    check(ok, parts.join(", "))
}

fn c4() -> Verdict {
    let mut mismatches = 0;
    for seed in 0..1000 {
        let (trace, n) = common::micro_instance(10_000 + seed);
        let out = run_sim(&trace, &ClusterSpec::single(n, Policy::LWL, 1.0, Granularity::Job, seed)).unwrap();
        let got: Vec<f64> = out.records.iter().map(|r| r.response).collect();
        if got != common::central_queue_responses(&trace, n as usize, 1.0) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("1000 instances, {mismatches} with differing per-job responses"))
}

fn c5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0u64;
    let mut comparisons = 0u64;
    for _ in 0..100_000 {
        let n = rng.random_range(2..=16usize);
        let backlogs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { rng.random_range(1..5u32) as f64 } else { rng.random_range(0.01..10.0) })
            .collect();
        let x = rng.random_range(0.01..20.0);
        let best = least_work_choices(&backlogs);
        for &c in &best {
            let lwl = min_after_assignment(&backlogs, c, x);
            for j in (0..n).filter(|j| !best.contains(j)) {
                comparisons += 1;
                if lwl < min_after_assignment(&backlogs, j, x) {
                    violations += 1;
                }
            }
        }
    }
    check(violations == 0, format!("{comparisons} comparisons, {violations} violations"))
}

const C6_N: [u32; 5] = [2, 10, 50, 100, 500];

fn c6_table() -> SweepTable {
    let trace = generate_synthetic(&SynthSpec::calibrated(62_500.0, 1)).unwrap();
    assert!(trace.len() >= 100_000, "calibrated trace too short: {}", trace.len());
    let plan = SweepPlan { n_list: C6_N.to_vec(), granularity: Granularity::Job, ..SweepPlan::default() };
    run_sweep(&trace, &plan).unwrap()
}

fn c6(out: &mut Outputs) -> Verdict {
    let t = c6_table();
    out.csv.insert("c6", t.to_csv_string());
    let curve = |p: Policy| C6_N.map(|n| t.mean_response(n, p).unwrap());
    let rr = curve(Policy::RR);
    let rr_up = rr[1..].windows(2).all(|w| w[1] > w[0]);
    let interior = |p: Policy| {
        let c = curve(p);
        let argmin = (0..c.len()).min_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
        (argmin != 0 && argmin != c.len() - 1, C6_N[argmin])
    };
    let (jiq_ok, jiq_n) = interior(Policy::JIQ);
    let (lwl_ok, lwl_n) = interior(Policy::LWL);
    let fmt = |c: [f64; 5]| c.map(|v| format!("{v:.2}")).join(" ");
    check(
        rr_up && jiq_ok && lwl_ok,
        format!("RR [{}] increasing from n=10: {rr_up}; JIQ min at n={jiq_n}; LWL min at n={lwl_n}", fmt(rr)),
    )
}

const C7_N: [u32; 9] = [2, 5, 10, 20, 50, 100, 200, 500, 1000];

fn c7_table() -> (SweepTable, f64) {
    let trace = generate_synthetic(&SynthSpec::monster(100_000.0, 1)).unwrap();
    let monsters = trace.jobs().iter().filter(|j| j.task_count() >= 100).count() as f64 / trace.len() as f64;
    let plan = SweepPlan {
        n_list: C7_N.to_vec(),
        granularity: Granularity::Task,
        policies: vec![Policy::JIQ, Policy::LWL],
        include_model: false,
        ..SweepPlan::default()
    };
    (run_sweep(&trace, &plan).unwrap(), monsters)
}

fn c7(out: &mut Outputs) -> Verdict {
    let (t, monsters) = c7_table();
    out.csv.insert("c7", t.to_csv_string());
    let r = |n, p| t.mean_response(n, p).unwrap();
    let wins: Vec<u32> = C7_N[1..C7_N.len() - 1].iter().copied().filter(|&n| r(n, Policy::JIQ) < r(n, Policy::LWL)).collect();
    let idle_ok = C7_N
        .iter()
        .filter(|&&n| n >= 500)
        .all(|&n| t.p_idle(n, Policy::JIQ).unwrap() >= t.p_idle(n, Policy::LWL).unwrap());
    let idle: Vec<String> = [500, 1000]
        .iter()
        .map(|&n| format!("n={n} {:.3}/{:.3}", t.p_idle(n, Policy::JIQ).unwrap(), t.p_idle(n, Policy::LWL).unwrap()))
        .collect();
    let example = wins.first().map(|&n| format!("n={n} JIQ {:.2} < LWL {:.2}", r(n, Policy::JIQ), r(n, Policy::LWL)));
    check(
        monsters >= 0.01 && !wins.is_empty() && idle_ok,
        format!(
            "monster jobs {:.2}% of jobs; JIQ below LWL at intermediate n {:?} ({}); p_idle JIQ/LWL {}",
            100.0 * monsters,
            wins,
            example.unwrap_or_else(|| "none".into()),
            idle.join(", ")
        ),
    )
}

fn c8() -> Verdict {
    let calibrated = generate_synthetic(&SynthSpec::calibrated(20_000.0, 8)).unwrap();
    let mut job_min = f64::INFINITY;
    for p in Policy::ALL {
        for n in [1u32, 10, 100] {
            let out = run_sim(&calibrated, &ClusterSpec::single(n, p, 10.0 / n as f64, Granularity::Job, 8)).unwrap();
            job_min = job_min.min(summarize(&out).unwrap().min_slowdown);
        }
    }
    let monster = generate_synthetic(&SynthSpec::monster(20_000.0, 8)).unwrap();
    let mut task_min = f64::INFINITY;
    for p in Policy::ALL {
        let out = run_sim(&monster, &ClusterSpec::single(100, p, 0.5, Granularity::Task, 8)).unwrap();
        let multi = out.records.iter().zip(monster.jobs()).filter(|(_, j)| j.task_count() > 1);
        task_min = task_min.min(multi.map(|(r, _)| r.slowdown).fold(f64::INFINITY, f64::min));
    }
    check(
        job_min >= 1.0 - 1e-9 && task_min < 1.0,
        format!("job-level min slowdown {job_min:.6}; task-level min slowdown on multi-task jobs {task_min:.4}"),
    )
}

fn c9_run() -> (f64, f64, String, String, String) {
    let trace = generate_synthetic(&SynthSpec::monster(100_000.0, 1)).unwrap();
    let plan = SweepPlan { n_list: vec![10], granularity: Granularity::Task, policies: vec![Policy::RR], ..SweepPlan::default() };
    let single = run_sweep(&trace, &plan).unwrap();
    let tuned = tune_two_stage(&trace, &TunePlan::new(10)).unwrap();
    let b = tuned.best;
    let desc = format!("n1={} n2={} theta={:.3} (q={})", b.n1, b.n2, b.theta, b.theta_quantile);
    (
        b.mean_response,
        single.mean_response(10, Policy::RR).unwrap(),
        desc,
        single.to_csv_string(),
        tuned.table.to_csv_string(),
    )
}

fn c9(out: &mut Outputs) -> Verdict {
    let (tuned, rr, desc, a, b) = c9_run();
    out.csv.insert("c9_single", a);
    out.csv.insert("c9_tune", b);
    check(tuned < rr, format!("tuned two-stage {tuned:.3} ({desc}) vs RR {rr:.3}, ratio {:.3}", tuned / rr))
}

fn c10() -> Verdict {
    let trace = generate_synthetic(&SynthSpec::calibrated(625_000.0, 1)).unwrap();
    let ns = [1u32, 2, 5, 10, 20, 50, 100];
    let raw_plan = SweepPlan {
        n_list: ns.to_vec(),
        granularity: Granularity::Job,
        policies: vec![Policy::RR, Policy::LWL],
        ..SweepPlan::default()
    };
    let tf_plan = SweepPlan {
        transforms: vec![
            Transform::StripOutliers { q: 0.999 },
            Transform::ShuffleIat,
            Transform::JobLevelView,
            Transform::ShuffleCpu { level: CpuShuffleLevel::Job },
        ],
        ..raw_plan.clone()
    };
    let raw = run_sweep(&trace, &raw_plan).unwrap();
    let tf = run_sweep(&trace, &tf_plan).unwrap();
    let err = |t: &SweepTable, n: u32, p: Policy| {
        let a = t.aggregate().into_iter().find(|a| a.n == n && a.policy == p).unwrap();
        rel(a.mean_response, a.model_mean_response.unwrap())
    };
    let (mut within, mut larger, mut worst) = (true, true, 0.0f64);
    let mut parts = Vec::new();
    for p in [Policy::RR, Policy::LWL] {
        for &n in &ns {
            let (et, er) = (err(&tf, n, p), err(&raw, n, p));
            within &= et <= 0.25;
            larger &= er > et;
            worst = worst.max(et);
            parts.push(format!("{p}{n} {:.0}%/{:.0}%", 100.0 * et, 100.0 * er));
        }
    }
    check(
        within && larger,
        format!(
            "{} jobs; worst transformed error {:.1}%; raw error larger everywhere: {larger}; |err| transformed/raw: {}",
            trace.len(),
            100.0 * worst,
            parts.join(" ")
        ),
    )
}

fn c11(out: &Outputs) -> Verdict {
    let mut rerun: BTreeMap<&str, String> = BTreeMap::new();
    rerun.insert("c6", c6_table().to_csv_string());
    rerun.insert("c7", c7_table().0.to_csv_string());
    let (_, _, _, a, b) = c9_run();
    rerun.insert("c9_single", a);
    rerun.insert("c9_tune", b);
    let trace_bytes = || {
        let mut buf = Vec::new();
        write_trace(&generate_synthetic(&SynthSpec::calibrated(5_000.0, 3)).unwrap(), &mut buf).unwrap();
        buf
    };
    let trace_same = trace_bytes() == trace_bytes();
    let differing: Vec<&str> = out.csv.iter().filter(|(k, v)| rerun.get(*k) != Some(v)).map(|(k, _)| *k).collect();
    check(
        differing.is_empty() && trace_same,
        format!("re-ran {} CSV outputs, differing: {:?}; synthetic trace bytes identical: {trace_same}", rerun.len(), differing),
    )
}

fn c12() -> Verdict {
    let Ok(path) = std::env::var("DISPATCHSIM_TRACE") else {
        return Skip("set DISPATCHSIM_TRACE to a task CSV of the cluster trace".into());
    };
    let full = match read_trace_file(path.as_ref()) {
        Ok(t) => t,
        Err(e) => return Fail(format!("cannot read {path}: {e}")),
    };
    let day = match day_window(&full, 4) {
        Ok(t) => t,
        Err(e) => return Fail(format!("day 4: {e}")),
    };
    let st = trace_stats(&day).unwrap();
    let single = 100.0 * st.single_task_fraction;
    let mean = st.moments.mean_y;
    let top = 100.0 * st.top_0_1pct_load_share;
    check(
        (single - 96.6).abs() <= 0.5 && rel(mean, 10.83) <= 0.02 && (top - 67.6).abs() <= 2.0,
        format!("day 4: single-task {single:.2}%, mean job CPU {mean:.3} s, top-0.1% share {top:.2}%"),
    )
}

fn main() -> ExitCode {
    let mut outputs = Outputs::default();
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t0 = Instant::now();
        let v = f();
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag} {id:>2} {name}: {detail} [{secs:.1}s]");
    };
    report(1, "erlang", &mut c1);
    let mm = markovian_trace();
    report(2, "mm1", &mut || c2(&mm));
    report(3, "mmn", &mut || c3(&mm));
    drop(mm);
    report(4, "lwl-central-queue", &mut c4);
    report(5, "min-backlog-dominance", &mut c5);
    report(6, "curve-shapes", &mut || c6(&mut outputs));
    report(7, "jiq-lwl-reversal", &mut || c7(&mut outputs));
    report(8, "slowdown", &mut c8);
    report(9, "two-stage", &mut || c9(&mut outputs));
    report(10, "model-match", &mut c10);
    report(11, "determinism", &mut || c11(&outputs));
    report(12, "trace-statistics", &mut c12);
    if failed == 0 {
        println!("acceptance: all criteria passed or skipped");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
