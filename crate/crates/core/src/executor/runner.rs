//! Execution backends.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::script::{emit_batch_script, job_name, Scheduler};
use crate::adapters::{
    build_command, default_binary, hpl_generate_input, render_template, run_variables, square_grid, HplParams,
    DEFAULT_KERNEL_N, DEFAULT_KERNEL_SEED,
};
use crate::domain::{BenchmarkCase, Family, RunConfig};
use crate::kernels::run_builtin_linpack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunnerKind {
    Local,
    BatchScript,
    Replay,
}

impl RunnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RunnerKind::Local => "local",
            RunnerKind::BatchScript => "batch_script",
            RunnerKind::Replay => "replay",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("fixture not found: {0}")]
    MissingFixture(PathBuf),
    #[error("batch script written to {script}; output {output} not available yet")]
    Pending { script: PathBuf, output: PathBuf },
    #[error("cannot launch {program}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("process exited with {status}: {stderr}")]
    Exit { status: String, stderr: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot prepare inputs: {0}")]
    Prepare(String),
}

fn io_ctx(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunnerError {
    let context = context.into();
    move |source| RunnerError::Io { context, source }
}

/// Raw output of one run. `wall_seconds` is set only when the runner timed
/// the run itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub output: String,
    pub wall_seconds: Option<f64>,
}

/// Maps a case and config to raw output text.
pub trait Runner {
    fn kind(&self) -> RunnerKind;
    fn run(&self, case: &BenchmarkCase, config: &RunConfig) -> Result<RawRun, RunnerError>;
}

fn kernel_params(case: &BenchmarkCase) -> (usize, u64) {
    let n = case.parameter("n").and_then(|v| v.as_i64()).unwrap_or(DEFAULT_KERNEL_N);
    let seed = case.parameter("seed").and_then(|v| v.as_i64()).unwrap_or(DEFAULT_KERNEL_SEED);
    (n.max(1) as usize, seed as u64)
}

/// Runs the built-in kernel in this process and renders the same JSON line
/// the `kernel` subcommand prints.
pub fn run_kernel_in_process(case: &BenchmarkCase) -> Result<RawRun, RunnerError> {
    let (n, seed) = kernel_params(case);
    let start = Instant::now();
    let result = run_builtin_linpack(n, seed).map_err(|e| RunnerError::Prepare(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();
    let output = serde_json::to_string(&result).map_err(|e| RunnerError::Prepare(e.to_string()))?;
    Ok(RawRun { output: output + "\n", wall_seconds: Some(wall) })
}

/// Resolves the program a case runs: the suite binary for the built-in
/// kernel, otherwise the `binary` parameter or the family default.
pub fn resolve_binary(case: &BenchmarkCase, suite_binary: &Path) -> String {
    match case.family {
        Family::BuiltinLu => suite_binary.display().to_string(),
        family => case.parameter_str("binary").or_else(|| default_binary(family).map(String::from)).unwrap_or_default(),
    }
}

/// Runs on this machine by spawning the case's command and timing it with a
/// monotonic clock from spawn to exit.
#[derive(Debug, Clone)]
pub struct LocalRunner {
    suite_binary: PathBuf,
    work_root: PathBuf,
    template_root: PathBuf,
    in_process_kernel: bool,
}

impl LocalRunner {
    pub fn new(suite_binary: impl Into<PathBuf>, work_root: impl Into<PathBuf>) -> Self {
        LocalRunner {
            suite_binary: suite_binary.into(),
            work_root: work_root.into(),
            template_root: PathBuf::from("."),
            in_process_kernel: false,
        }
    }

    /// Runs the built-in kernel inside this process instead of spawning the
    /// suite binary. Other families are still spawned.
    pub fn in_process(work_root: impl Into<PathBuf>) -> Self {
        LocalRunner { in_process_kernel: true, ..LocalRunner::new("scalebench", work_root) }
    }

    /// Directory that relative template paths are resolved against.
    pub fn with_template_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.template_root = root.into();
        self
    }

    fn prepare_inputs(&self, case: &BenchmarkCase, config: &RunConfig, dir: &Path) -> Result<(), RunnerError> {
        let vars = run_variables(case, config);
        let mut wrote_hpl_dat = false;
        for rel in &case.template_paths {
            let src = self.template_root.join(rel);
            let text = std::fs::read_to_string(&src).map_err(io_ctx(format!("reading {}", src.display())))?;
            let rendered = render_template(&text, &vars).map_err(|e| RunnerError::Prepare(e.to_string()))?;
            let file_name = src
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| RunnerError::Prepare(format!("bad template path {}", src.display())))?;
            let target =
                file_name.strip_suffix(".tmpl").or_else(|| file_name.strip_suffix(".template")).unwrap_or(file_name);
            wrote_hpl_dat |= target == "HPL.dat";
            std::fs::write(dir.join(target), rendered).map_err(io_ctx(format!("writing {target}")))?;
        }
        if case.family == Family::Hpl && !wrote_hpl_dat {
            let get = |k: &str, default: u64| {
                case.parameter(k).and_then(|v| v.as_i64()).map(|v| v.max(0) as u64).unwrap_or(default)
            };
            let (p, q) = square_grid(config.total_cores());
            let params = HplParams { n: get("n", 10_000), nb: get("nb", 192), p: get("p", p), q: get("q", q) };
            params.check_ranks(config.total_cores()).map_err(|e| RunnerError::Prepare(e.to_string()))?;
            let dat = hpl_generate_input(&params).map_err(|e| RunnerError::Prepare(e.to_string()))?;
            std::fs::write(dir.join("HPL.dat"), dat).map_err(io_ctx("writing HPL.dat"))?;
        }
        Ok(())
    }
}

fn output_file(case: &BenchmarkCase) -> Option<String> {
    case.parameter_str("output_file").or_else(|| match case.family {
        Family::Vasp => Some("OUTCAR".into()),
        Family::Gromacs => Some("md.log".into()),
        _ => None,
    })
}

impl Runner for LocalRunner {
    fn kind(&self) -> RunnerKind {
        RunnerKind::Local
    }

    fn run(&self, case: &BenchmarkCase, config: &RunConfig) -> Result<RawRun, RunnerError> {
        if case.family == Family::BuiltinLu && self.in_process_kernel {
            return run_kernel_in_process(case);
        }
        let dir = self.work_root.join(format!("{}_r{}", job_name(case, config), config.repetition));
        std::fs::create_dir_all(&dir).map_err(io_ctx(format!("creating {}", dir.display())))?;
        self.prepare_inputs(case, config, &dir)?;

        let cmd = build_command(case, config, &resolve_binary(case, &self.suite_binary));
        let (program, args) = cmd.argv.split_first().ok_or_else(|| RunnerError::Prepare("empty argv".into()))?;
        let start = Instant::now();
        let out = Command::new(program)
            .args(args)
            .envs(&cmd.env)
            .current_dir(&dir)
            .output()
            .map_err(|source| RunnerError::Spawn { program: program.clone(), source })?;
        let wall = start.elapsed().as_secs_f64();

        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        std::fs::write(dir.join("stdout.log"), &stdout).map_err(io_ctx("writing stdout.log"))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            let tail: String =
                stderr.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
            return Err(RunnerError::Exit { status: out.status.to_string(), stderr: tail });
        }
        let output = match output_file(case).map(|f| dir.join(f)).filter(|p| p.exists()) {
            Some(path) => std::fs::read_to_string(&path).map_err(io_ctx(format!("reading {}", path.display())))?,
            None => stdout,
        };
        Ok(RawRun { output, wall_seconds: Some(wall) })
    }
}

/// Substitutes recorded outputs for live runs. Fixtures live at
/// `<root>/<family>/<case>/<nodes>x<ppn>.out`.
#[derive(Debug, Clone)]
pub struct ReplayRunner {
    root: PathBuf,
}

impl ReplayRunner {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ReplayRunner { root: root.into() }
    }

    pub fn fixture_path(&self, case: &BenchmarkCase, config: &RunConfig) -> PathBuf {
        self.root.join(case.family.as_str()).join(&case.case_name).join(format!("{}x{}.out", config.nodes, config.ppn))
    }
}

impl Runner for ReplayRunner {
    fn kind(&self) -> RunnerKind {
        RunnerKind::Replay
    }

    fn run(&self, case: &BenchmarkCase, config: &RunConfig) -> Result<RawRun, RunnerError> {
        let path = self.fixture_path(case, config);
        match std::fs::read_to_string(&path) {
            Ok(output) => Ok(RawRun { output, wall_seconds: None }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(RunnerError::MissingFixture(path)),
            Err(e) => Err(io_ctx(format!("reading {}", path.display()))(e)),
        }
    }
}

/// Writes one job script per run into a directory and collects outputs that
/// a previous submission left next to them. It never submits jobs itself.
#[derive(Debug, Clone)]
pub struct BatchScriptRunner {
    dir: PathBuf,
    scheduler: Scheduler,
    suite_binary: PathBuf,
}

impl BatchScriptRunner {
    pub fn new(dir: impl Into<PathBuf>, scheduler: Scheduler, suite_binary: impl Into<PathBuf>) -> Self {
        BatchScriptRunner { dir: dir.into(), scheduler, suite_binary: suite_binary.into() }
    }

    fn stem(case: &BenchmarkCase, config: &RunConfig) -> String {
        match config.repetition {
            0 => job_name(case, config),
            r => format!("{}_r{r}", job_name(case, config)),
        }
    }

    pub fn script_path(&self, case: &BenchmarkCase, config: &RunConfig) -> PathBuf {
        self.dir.join(format!("{}.sh", Self::stem(case, config)))
    }

    pub fn output_path(&self, case: &BenchmarkCase, config: &RunConfig) -> PathBuf {
        self.dir.join(format!("{}.out", Self::stem(case, config)))
    }
}

impl Runner for BatchScriptRunner {
    fn kind(&self) -> RunnerKind {
        RunnerKind::BatchScript
    }

    fn run(&self, case: &BenchmarkCase, config: &RunConfig) -> Result<RawRun, RunnerError> {
        let output = self.output_path(case, config);
        if let Ok(text) = std::fs::read_to_string(&output) {
            if !text.trim().is_empty() {
                return Ok(RawRun { output: text, wall_seconds: None });
            }
        }
        std::fs::create_dir_all(&self.dir).map_err(io_ctx(format!("creating {}", self.dir.display())))?;
        let script = self.script_path(case, config);
        let out_abs = std::path::absolute(&output).unwrap_or_else(|_| output.clone());
        let body = emit_batch_script(
            case,
            config,
            self.scheduler,
            &resolve_binary(case, &self.suite_binary),
            Some(&out_abs.display().to_string()),
        );
        std::fs::write(&script, body).map_err(io_ctx(format!("writing {}", script.display())))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let _ = std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755));
        }
        Err(RunnerError::Pending { script, output })
    }
}
