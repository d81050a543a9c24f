//! Trace-driven discrete-event simulation and closed-form models for
//! dispatching jobs (or their tasks) over clusters of FCFS servers.
//!
//! The crate is organised bottom-up:
//!
//! * [`workload`] ingests, transforms, summarises and synthesises traces.
//! * [`models`] holds the Erlang formulas and the two-moment mean response
//!   time approximations for RR, LWL and JIQ dispatching.
//! * [`sim`] is the event-driven cluster simulator (single- or two-stage).
//! * [`metrics`] turns per-job records into summary statistics.
//! * [`harness`] runs fixed-budget sweeps over the number of servers,
//!   per-day spreads and two-stage tuning grids.
//! * [`config`] is the strict TOML schema used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod workload;

pub use metrics::{boxplot_stats, summarize, BoxplotStats, Summary};
pub use models::{ClusterParams, PhiVariant, Policy};
pub use sim::{run_sim, ClusterSpec, Granularity, SimOutput, Topology};
pub use workload::{Job, TaskDemand, Timestamp, WorkloadMoments, WorkloadTrace};
