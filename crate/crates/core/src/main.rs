use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dispatchsim::config::{ConfigError, Preset, RunConfig, SimulateConfig, TraceSource};
use dispatchsim::harness::{self, HarnessError, SweepPlan, TunePlan};
use dispatchsim::metrics::{self, MetricsError};
use dispatchsim::models::{ClusterParams, Policy};
use dispatchsim::sim::{self, ClusterSpec, SimError, SimSummaryJson};
use dispatchsim::workload::{
    self, estimate_moments, quantile_task_cpu, CpuShuffleLevel, Transform, WorkloadError, WorkloadTrace,
};

#[derive(Parser)]
#[command(name = "dispatchsim", version, about = "Simulate and model RR, JIQ and LWL dispatching over FCFS clusters")]
struct Cli {
    /// Maximum number of concurrent simulation workers.
    #[arg(long, global = true, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    jobs: Option<usize>,
    /// Default seed for synthetic traces, shuffles and dispatchers.
    #[arg(long, global = true, env = "DISPATCHSIM_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print workload moments and dataset statistics of a trace.
    Analyze {
        trace: PathBuf,
        /// Only analyze the day window [d*86400, (d+1)*86400).
        #[arg(long)]
        day: Option<u32>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Apply transforms, in flag order, and write a canonical trace.
    Transform(TransformArgs),
    /// Generate a synthetic trace.
    Synth {
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<PresetArg>,
        /// Seconds of arrivals.
        #[arg(long, default_value_t = 62_500.0)]
        duration: f64,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        mean_demand: Option<f64>,
        /// Config whose [trace] section describes a synthetic source.
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run one simulation described by the [simulate] section.
    Simulate(ConfigArgs),
    /// Evaluate the analytic models from the [model] section.
    Model(ConfigArgs),
    /// Sweep n at a fixed budget per the [sweep] section.
    Sweep(ConfigArgs),
    /// Per-day spread of the [sweep] section.
    Spread(ConfigArgs),
    /// Tune a two-stage cluster per the [tune] section.
    Tune(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Calibrated,
    Monster,
    Markovian,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Job,
    Task,
}

#[derive(Args)]
struct TransformArgs {
    input: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, action = ArgAction::Count)]
    shuffle_iat: u8,
    #[arg(long, value_enum, action = ArgAction::Append)]
    shuffle_cpu: Vec<LevelArg>,
    #[arg(long, action = ArgAction::Append)]
    strip_outliers: Vec<f64>,
    #[arg(long, action = ArgAction::Count)]
    job_level: u8,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Trace file, replacing the config's [trace] source.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output JSON path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Comma-separated server counts.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<u32>>,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    #[arg(long)]
    rho0: Option<f64>,
}

enum Failure {
    Usage(String),
    Data(String),
    Unstable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Unstable(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Unstable(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<WorkloadError> for Failure {
    fn from(e: WorkloadError) -> Self {
        match e {
            WorkloadError::NotJobLevel | WorkloadError::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Internal(_) => Failure::Data(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Unstable(_) => Failure::Unstable(e.to_string()),
            HarnessError::InvalidPlan(_) | HarnessError::Model(_) => Failure::Usage(e.to_string()),
            HarnessError::Workload(w) => w.into(),
            HarnessError::Sim(s) => s.into(),
            HarnessError::Metrics(m) => m.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(format!("i/o error: {e}"))
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Context {
    workers: Option<usize>,
    seed: Option<u64>,
}

impl Context {
    fn default_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let ctx = Context { workers: cli.jobs, seed: cli.seed };
    let sub = matches.subcommand().map(|(_, m)| m);
    let result = match cli.command {
        Command::Analyze { trace, day, json } => cmd_analyze(&trace, day, json),
        Command::Transform(args) => cmd_transform(&args, sub.expect("subcommand matches"), &ctx),
        Command::Synth { preset, duration, rate, mean_demand, config, out } => {
            cmd_synth(preset, duration, rate, mean_demand, config.as_deref(), &out, &ctx)
        }
        Command::Simulate(a) => cmd_simulate(&a, &ctx),
        Command::Model(a) => cmd_model(&a, &ctx),
        Command::Sweep(a) => cmd_sweep(&a, &ctx, false),
        Command::Spread(a) => cmd_sweep(&a, &ctx, true),
        Command::Tune(a) => cmd_tune(&a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn cmd_analyze(path: &Path, day: Option<u32>, json: bool) -> CliResult {
    let mut trace = workload::read_trace_file(path)?;
    if let Some(d) = day {
        trace = workload::day_window(&trace, d)?;
    }
    let st = workload::trace_stats(&trace)?;
    let text = if json {
        to_json(&st)
    } else {
        let m = &st.moments;
        let mut s = String::new();
        s += &format!("n_jobs                {}\n", m.n_jobs);
        s += &format!("n_tasks               {}\n", m.n_tasks);
        s += &format!("single_task_fraction  {}\n", st.single_task_fraction);
        s += &format!("max_tasks_per_job     {}\n", st.max_tasks_per_job);
        s += &format!("lambda                {}\n", m.lambda);
        s += &format!("mean_iat              {}\n", 1.0 / m.lambda);
        s += &format!("c_a                   {}\n", m.c_a);
        s += &format!("mean_y                {}\n", m.mean_y);
        s += &format!("c_y                   {}\n", m.c_y);
        s += &format!("top_0.1pct_load_share {}\n", st.top_0_1pct_load_share);
        s += &format!("frac_jobs_above_mean  {}\n", st.frac_jobs_above_mean);
        for (q, v) in st.job_cpu_quantiles {
            s += &format!("job_cpu_q{:<13} {}\n", q, v);
        }
        s
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

/// Transform flags in command-line order.
fn ordered_transforms(args: &TransformArgs, m: &ArgMatches) -> Vec<Transform> {
    let mut steps: Vec<(usize, Transform)> = Vec::new();
    if args.shuffle_iat > 0 {
        steps.extend(m.indices_of("shuffle_iat").into_iter().flatten().map(|i| (i, Transform::ShuffleIat)));
    }
    if args.job_level > 0 {
        steps.extend(m.indices_of("job_level").into_iter().flatten().map(|i| (i, Transform::JobLevelView)));
    }
    let idx = |name: &str| m.indices_of(name).into_iter().flatten().collect::<Vec<_>>();
    for (i, level) in idx("shuffle_cpu").into_iter().zip(&args.shuffle_cpu) {
        let level = match level {
            LevelArg::Job => CpuShuffleLevel::Job,
            LevelArg::Task => CpuShuffleLevel::Task,
        };
        steps.push((i, Transform::ShuffleCpu { level }));
    }
    for (i, &q) in idx("strip_outliers").into_iter().zip(&args.strip_outliers) {
        steps.push((i, Transform::StripOutliers { q }));
    }
    steps.sort_by_key(|s| s.0);
    steps.into_iter().map(|s| s.1).collect()
}

fn cmd_transform(args: &TransformArgs, m: &ArgMatches, ctx: &Context) -> CliResult {
    let steps = ordered_transforms(args, m);
    let raw = fs::read(&args.input).map_err(|e| Failure::Data(format!("cannot read {}: {e}", args.input.display())))?;
    let trace = workload::parse_trace(raw.as_slice(), workload::TraceFormat::TaskCsv, &args.input.display().to_string())?;
    let mut job_level = trace.is_job_level();
    for s in &steps {
        match s {
            Transform::JobLevelView => job_level = true,
            Transform::ShuffleCpu { level: CpuShuffleLevel::Job } if !job_level => {
                return Err(Failure::Usage(
                    "--shuffle-cpu job needs a job-level trace; put --job-level before it".into(),
                ))
            }
            _ => {}
        }
    }
    if steps.is_empty() {
        write_file(&args.out, &raw)?;
        println!("copied {} jobs ({} tasks) to {}", trace.len(), trace.task_count(), args.out.display());
        return Ok(());
    }
    let out = Transform::apply_all(&steps, &trace, ctx.default_seed())?;
    let mut buf = Vec::new();
    workload::write_trace(&out, &mut buf)?;
    write_file(&args.out, &buf)?;
    println!(
        "wrote {} jobs ({} tasks, {} removed) to {} [{}]",
        out.len(),
        out.task_count(),
        trace.len() - out.len(),
        args.out.display(),
        out.label()
    );
    Ok(())
}

fn cmd_synth(
    preset: Option<PresetArg>,
    duration: f64,
    rate: Option<f64>,
    mean_demand: Option<f64>,
    config: Option<&Path>,
    out: &Path,
    ctx: &Context,
) -> CliResult {
    let source = match config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            let src = cfg.trace.ok_or_else(|| Failure::Usage("config has no [trace] section".into()))?;
            if src.path.is_some() {
                return Err(Failure::Usage("synth needs a synthetic [trace] source, not a path".into()));
            }
            src
        }
        None => {
            let preset = match preset.ok_or_else(|| Failure::Usage("give --preset or --config".into()))? {
                PresetArg::Calibrated => Preset::Calibrated,
                PresetArg::Monster => Preset::Monster,
                PresetArg::Markovian => Preset::Markovian,
            };
            let src = TraceSource {
                preset: Some(preset),
                duration: Some(duration),
                rate: rate.or((preset == Preset::Markovian).then_some(1.0)),
                mean_demand: mean_demand.or((preset == Preset::Markovian).then_some(1.0)),
                ..TraceSource::default()
            };
            src.validate()?;
            src
        }
    };
    let trace = match ctx.seed {
        Some(s) => TraceSource { seed: Some(s), ..source }.load(s)?,
        None => source.load(0)?,
    };
    let mut buf = Vec::new();
    workload::write_trace(&trace, &mut buf)?;
    write_file(out, &buf)?;
    println!("wrote {} jobs ({} tasks) to {}", trace.len(), trace.task_count(), out.display());
    Ok(())
}

fn load_config(a: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(p) = &a.trace {
        cfg.trace = Some(TraceSource { path: Some(p.clone()), ..TraceSource::default() });
    }
    if let Some(p) = &a.out {
        cfg.output.csv = Some(p.clone());
    }
    if let Some(p) = &a.json {
        cfg.output.json = Some(p.clone());
    }
    Ok(cfg)
}

fn workers(cfg: &RunConfig, ctx: &Context) -> usize {
    ctx.workers.or(cfg.workers).unwrap_or(1)
}

fn load_trace(cfg: &RunConfig, ctx: &Context) -> CliResult<WorkloadTrace> {
    let src = cfg.trace.as_ref().ok_or_else(|| Failure::Usage("config has no [trace] section".into()))?;
    Ok(src.load(ctx.default_seed())?)
}

fn csv_path(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.output.csv.as_deref().ok_or_else(|| Failure::Usage("no output CSV path (set [output] csv or --out)".into()))
}

fn write_json_sidecar(cfg: &RunConfig, body: &str) -> CliResult {
    let path = match (&cfg.output.json, &cfg.output.csv) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.with_extension("json"),
        (None, None) => return Ok(()),
    };
    write_file(&path, body.as_bytes())
}

#[derive(Serialize)]
struct SimulateReport {
    run: SimSummaryJson,
    metrics: metrics::Summary,
    transforms: Vec<Transform>,
    trace_label: String,
}

fn cmd_simulate(a: &ConfigArgs, ctx: &Context) -> CliResult {
    let cfg = load_config(a)?;
    let mut sc: SimulateConfig =
        cfg.simulate.clone().ok_or_else(|| Failure::Usage("config has no [simulate] section".into()))?;
    if let Some(r) = a.rho0 {
        sc.rho0 = r;
    }
    if let Some(p) = a.policies.as_ref().and_then(|p| p.first()) {
        sc.policy = *p;
    }
    let trace = Transform::apply_all(&sc.transforms, &load_trace(&cfg, ctx)?, sc.transform_seed)?;
    let seed = ctx.seed.or(sc.seed).unwrap_or(0);
    let total = sc.n.unwrap_or_else(|| sc.n1.unwrap_or(0) + sc.n2.unwrap_or(0));
    let mu = match sc.mu {
        Some(mu) => mu,
        None => {
            if sc.rho0 >= 1.0 {
                return Err(Failure::Unstable(format!("rho0 = {} >= 1", sc.rho0)));
            }
            let m = estimate_moments(&trace)?;
            let p = ClusterParams { lambda: m.lambda, c_a: m.c_a, mean_y: m.mean_y, c_y: m.c_y, rho0: sc.rho0, n: total };
            p.validate().map_err(Failure::Usage)?;
            dispatchsim::models::server_rate(&p)
        }
    };
    let spec = match (sc.n, sc.n1, sc.n2) {
        (Some(n), _, _) => ClusterSpec::single(n, sc.policy, mu, sc.granularity.unwrap_or_default(), seed),
        (None, Some(n1), Some(n2)) => {
            let theta = match (sc.theta, sc.theta_quantile) {
                (Some(t), _) => t,
                (None, Some(q)) => quantile_task_cpu(&trace, q)?,
                _ => unreachable!("validated config"),
            };
            ClusterSpec::two_stage(n1, n2, theta, mu, seed)
        }
        _ => unreachable!("validated config"),
    };
    let out = sim::run_sim(&trace, &spec)?;
    let summary = metrics::summarize(&out)?;
    let report = SimulateReport {
        run: SimSummaryJson::new(&out, &spec),
        metrics: summary.clone(),
        transforms: sc.transforms.clone(),
        trace_label: trace.label().to_owned(),
    };
    if let Some(p) = &cfg.output.csv {
        let mut buf = Vec::new();
        sim::write_records_csv(&out, &mut buf)?;
        write_file(p, &buf)?;
    }
    write_json_sidecar(&cfg, &to_json(&report))?;
    println!(
        "jobs {} mean_response {} mean_slowdown {} p_idle {} utilization {:?}",
        summary.n_jobs, summary.mean_response, summary.mean_slowdown, summary.p_idle_at_arrival, summary.realized_utilization
    );
    Ok(())
}

fn cmd_model(a: &ConfigArgs, ctx: &Context) -> CliResult {
    let cfg = load_config(a)?;
    let mut mc = cfg.model.clone().ok_or_else(|| Failure::Usage("config has no [model] section".into()))?;
    if let Some(n) = &a.n_list {
        mc.n_list = n.clone();
    }
    if let Some(p) = &a.policies {
        mc.policies = p.clone();
    }
    if let Some(r) = a.rho0 {
        mc.rho0 = r;
    }
    let [lambda, c_a, mean_y, c_y] = match mc.inline_moments()? {
        Some(m) => m,
        None => {
            let m = estimate_moments(&load_trace(&cfg, ctx)?)?;
            [m.lambda, m.c_a, m.mean_y, m.c_y]
        }
    };
    let base = ClusterParams { lambda, c_a, mean_y, c_y, rho0: mc.rho0, n: 1 };
    let rows = harness::model_rows(&base, &mc.n_list, &mc.policies, mc.variant)?;
    let mut buf = Vec::new();
    harness::write_model_csv(&rows, &mut buf)?;
    match &cfg.output.csv {
        Some(p) => write_file(p, &buf)?,
        None => io::stdout().write_all(&buf)?,
    }
    #[derive(Serialize)]
    struct ModelMeta<'a> {
        params: ClusterParams,
        rows: &'a [harness::ModelRow],
    }
    write_json_sidecar(&cfg, &to_json(&ModelMeta { params: base, rows: &rows }))?;
    Ok(())
}

fn sweep_plan(cfg: &RunConfig, a: &ConfigArgs, ctx: &Context) -> CliResult<SweepPlan> {
    let mut plan = cfg.sweep.clone().ok_or_else(|| Failure::Usage("config has no [sweep] section".into()))?;
    if let Some(n) = &a.n_list {
        plan.n_list = n.clone();
    }
    if let Some(p) = &a.policies {
        plan.policies = p.clone();
    }
    if let Some(r) = a.rho0 {
        plan.rho0 = r;
    }
    if let Some(s) = ctx.seed {
        plan.seeds = vec![s];
    }
    Ok(plan)
}

fn cmd_sweep(a: &ConfigArgs, ctx: &Context, spread: bool) -> CliResult {
    let cfg = load_config(a)?;
    let plan = sweep_plan(&cfg, a, ctx)?;
    let trace = load_trace(&cfg, ctx)?;
    let out = csv_path(&cfg)?;
    let w = workers(&cfg, ctx);
    if spread {
        let report = harness::with_workers(w, || harness::per_day_spread(&trace, &plan))?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write_file(out, &buf)?;
        #[derive(Serialize)]
        struct SpreadMeta<'a> {
            days: &'a [u32],
            skipped_days: &'a [u32],
            day_count: usize,
            per_day: Vec<(Policy, u32, &'a [f64])>,
        }
        let meta = SpreadMeta {
            days: &report.days,
            skipped_days: &report.skipped_days,
            day_count: report.days.len(),
            per_day: report.per_day.iter().map(|((p, n), v)| (*p, *n, v.as_slice())).collect(),
        };
        write_json_sidecar(&cfg, &to_json(&meta))?;
        println!("{} days used, {} skipped, wrote {}", report.days.len(), report.skipped_days.len(), out.display());
        return Ok(());
    }
    let table = harness::with_workers(w, || harness::run_sweep(&trace, &plan))?;
    write_file(out, table.to_csv_string().as_bytes())?;
    let mut meta = table.meta_json();
    meta.push('\n');
    write_json_sidecar(&cfg, &meta)?;
    println!("{} rows, wrote {}", table.rows.len(), out.display());
    if let Ok(f) = harness::compare_policies(&table) {
        for (n, ranking) in &f.ranking {
            let names: Vec<String> = ranking.iter().map(|(p, v)| format!("{p}={v:.4}")).collect();
            println!("n={n}: {}", names.join(" < "));
        }
        for (p, n, v) in &f.minimizers {
            println!("{p} minimum at n={n} ({v:.4})");
        }
        for c in &f.crossovers {
            println!("{} and {} swap order between n={} and n={}", c.first, c.second, c.n_before, c.n_after);
        }
    }
    Ok(())
}

fn cmd_tune(a: &ConfigArgs, ctx: &Context) -> CliResult {
    let cfg = load_config(a)?;
    let mut plan: TunePlan = cfg.tune.clone().ok_or_else(|| Failure::Usage("config has no [tune] section".into()))?;
    if let Some(r) = a.rho0 {
        plan.rho0 = r;
    }
    if let Some(s) = ctx.seed {
        plan.seeds = vec![s];
    }
    let trace = load_trace(&cfg, ctx)?;
    let out = csv_path(&cfg)?;
    let result = harness::with_workers(workers(&cfg, ctx), || harness::tune_two_stage(&trace, &plan))?;
    write_file(out, result.table.to_csv_string().as_bytes())?;
    #[derive(Serialize)]
    struct TuneMeta<'a> {
        best: harness::TunePoint,
        grid: &'a [harness::TunePoint],
        meta: &'a harness::SweepMeta,
    }
    write_json_sidecar(&cfg, &to_json(&TuneMeta { best: result.best, grid: &result.grid, meta: &result.table.meta }))?;
    let b = result.best;
    println!(
        "best n1={} n2={} theta={} (quantile {}) mean_response {}",
        b.n1, b.n2, b.theta, b.theta_quantile, b.mean_response
    );
    Ok(())
}
