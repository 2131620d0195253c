//! Run planning and execution.
//!
//! A plan is executed sequentially in plan order. A failed run is reported
//! in [`ExecutionReport::failures`] and the remaining runs still execute;
//! no record is ever fabricated for a failed run.

mod plan;
mod runner;
mod script;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use plan::{plan_runs, RunPlan};
pub use runner::{
    resolve_binary, run_kernel_in_process, BatchScriptRunner, LocalRunner, RawRun, ReplayRunner, Runner, RunnerError,
    RunnerKind,
};
pub use script::{emit_batch_script, job_name, shell_quote, Scheduler};

use crate::adapters::parse_output;
use crate::domain::{format_timestamp, validate_record, RunConfig, RunRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// A run that produced no record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub config: RunConfig,
    pub cause: String,
    /// The run was handed to a scheduler and its output is not back yet.
    pub pending: bool,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run failed (nodes={}, ppn={}, repetition={}): {}",
            self.config.nodes, self.config.ppn, self.config.repetition, self.cause
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutionReport {
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

impl ExecutionReport {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn pending(&self) -> usize {
        self.failures.iter().filter(|f| f.pending).count()
    }
}

fn hostname() -> String {
    std::fs::read_to_string("/proc/sys/kernel/hostname")
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .or_else(|| std::env::var("COMPUTERNAME").ok())
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Host facts recorded with every run.
pub fn capture_environment() -> BTreeMap<String, String> {
    capture_environment_at(Utc::now())
}

pub fn capture_environment_at(now: DateTime<Utc>) -> BTreeMap<String, String> {
    let cpus = std::thread::available_parallelism().map(|n| n.get().to_string()).unwrap_or_else(|_| "unknown".into());
    BTreeMap::from([
        ("hostname".to_string(), hostname()),
        ("logical_cpu_count".to_string(), cpus),
        ("timestamp_utc".to_string(), format_timestamp(now)),
        ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ("os".to_string(), std::env::consts::OS.to_string()),
        ("arch".to_string(), std::env::consts::ARCH.to_string()),
    ])
}

/// Executes every config of `plan` with `runner`, stamping records with the
/// current time.
pub fn execute_plan(plan: &RunPlan, runner: &dyn Runner) -> ExecutionReport {
    execute_plan_at(plan, runner, &Utc::now)
}

/// Like [`execute_plan`] with an explicit clock.
pub fn execute_plan_at(plan: &RunPlan, runner: &dyn Runner, clock: &dyn Fn() -> DateTime<Utc>) -> ExecutionReport {
    let mut report = ExecutionReport::default();
    for config in plan.configs() {
        match execute_one(plan, runner, config, clock) {
            Ok(record) => report.records.push(record),
            Err((cause, pending)) => {
                let failure = RunFailure { config: *config, cause, pending };
                if pending {
                    log::info!("{failure}");
                } else {
                    log::warn!("{failure}");
                }
                report.failures.push(failure);
            }
        }
    }
    report
}

fn execute_one(
    plan: &RunPlan,
    runner: &dyn Runner,
    config: &RunConfig,
    clock: &dyn Fn() -> DateTime<Utc>,
) -> Result<RunRecord, (String, bool)> {
    let raw = runner.run(&plan.case, config).map_err(|e| (e.to_string(), matches!(e, RunnerError::Pending { .. })))?;
    let parsed = parse_output(plan.case.family, &raw.output).map_err(|e| (e.to_string(), false))?;
    let now = clock();

    let mut metadata = capture_environment_at(now);
    metadata.insert("runner".into(), runner.kind().as_str().into());
    metadata.insert("repetition".into(), config.repetition.to_string());
    // The application's own timer excludes launcher overhead, so it wins over wall time.
    metadata.insert("time_source".into(), "parsed".into());
    if let Some(wall) = raw.wall_seconds {
        metadata.insert("wall_seconds".into(), wall.to_string());
    }
    for (k, v) in parsed.extras {
        metadata.entry(k).or_insert(v);
    }

    let record = RunRecord {
        record_id: String::new(),
        site_id: plan.site.id.clone(),
        family: plan.case.family,
        case_name: plan.case.case_name.clone(),
        nodes: config.nodes,
        ppn: config.ppn,
        runtime_seconds: parsed.runtime_seconds,
        gflops: parsed.gflops,
        passed: parsed.passed,
        timestamp_utc: format_timestamp(now),
        tool_version: TOOL_VERSION.to_string(),
        metadata,
    }
    .with_computed_id();
    validate_record(record).map_err(|e| (e.to_string(), false))
}
