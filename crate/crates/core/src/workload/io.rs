//! Per-task CSV ingestion and serialization.
//!
//! Format: header `job_id,task_index,arrival_time,cpu_time`, one row per
//! task, decimal seconds. Serialized traces use the same format with rows
//! in arrival order and tasks in index order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Job, Result, TaskDemand, Timestamp, WorkloadError, WorkloadTrace};

pub const HEADER: [&str; 4] = ["job_id", "task_index", "arrival_time", "cpu_time"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    /// The derived per-task CSV.
    #[default]
    TaskCsv,
}

struct PendingJob {
    job_id: String,
    arrival: Timestamp,
    tasks: Vec<TaskDemand>,
    first_line: u64,
}

fn malformed(line: u64, reason: impl Into<String>) -> WorkloadError {
    WorkloadError::Malformed { line, reason: reason.into() }
}

fn parse_decimal(field: &str, name: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("{name} {field:?} is not a decimal number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(malformed(line, format!("{name} {field:?} must be a non-negative finite number")));
    }
    Ok(v)
}

/// Parses a per-task CSV stream into a trace labelled `source_name`.
///
/// Tasks of one job may appear on any rows; the job arrives at the earliest
/// arrival time among its rows.
pub fn parse_trace<R: Read>(source: R, format: TraceFormat, source_name: &str) -> Result<WorkloadTrace> {
    let TraceFormat::TaskCsv = format;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let header = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(malformed(1, format!("expected header {}, found {}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(","))));
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<PendingJob> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(malformed(line, format!("expected 4 fields, found {}", record.len())));
        }
        let job_id = &record[0];
        if job_id.is_empty() {
            return Err(malformed(line, "empty job_id"));
        }
        let task_index: u32 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("task_index {:?} is not a non-negative integer", &record[1])))?;
        let arrival_secs = parse_decimal(&record[2], "arrival_time", line)?;
        let arrival = Timestamp::from_secs_f64(arrival_secs)
            .ok_or_else(|| malformed(line, "arrival_time out of range"))?;
        let cpu = parse_decimal(&record[3], "cpu_time", line)?;
        if cpu <= 0.0 {
            return Err(malformed(line, format!("cpu_time {:?} must be positive", &record[3])));
        }

        let slot = *index.entry(job_id.to_owned()).or_insert_with(|| {
            pending.push(PendingJob { job_id: job_id.to_owned(), arrival, tasks: Vec::new(), first_line: line });
            pending.len() - 1
        });
        let job = &mut pending[slot];
        job.arrival = job.arrival.min(arrival);
        job.tasks.push(TaskDemand { task_index, cpu_demand: cpu });
    }

    if pending.is_empty() {
        return Err(WorkloadError::Empty);
    }
    let jobs = pending
        .into_iter()
        .map(|p| {
            Job::new(p.job_id, p.arrival, p.tasks).map_err(|e| match e {
                WorkloadError::DuplicateTask { .. } => e,
                other => malformed(p.first_line, other.to_string()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WorkloadTrace::new(jobs, 0.0, source_name)
}

pub fn read_trace_file(path: &Path) -> Result<WorkloadTrace> {
    let file = File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot open {}: {e}", path.display())))?;
    parse_trace(BufReader::new(file), TraceFormat::TaskCsv, &path.display().to_string())
}

/// Writes the canonical CSV form. Output bytes depend only on the trace.
pub fn write_trace<W: Write>(trace: &WorkloadTrace, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", HEADER.join(","))?;
    for job in trace.jobs() {
        for task in job.tasks() {
            writeln!(out, "{},{},{},{}", job.job_id(), task.task_index, job.arrival(), task.cpu_demand)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &WorkloadTrace, path: &Path) -> Result<()> {
    write_trace(trace, File::create(path)?)
}
