//! `scalebench` command-line front end.
//!
//! Exit status: 0 on success, 1 when a run, push or report fails, 2 for
//! usage and configuration errors.

mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use scalebench::executor::{
    capture_environment, execute_plan, plan_runs, BatchScriptRunner, ExecutionReport, LocalRunner, ReplayRunner,
    Runner, Scheduler,
};
use scalebench::kernels::run_builtin_linpack;
use scalebench::report::{build_series, write_report};
use scalebench::resultstore::{
    append_many, fetch_series, load_local, push_with, PushError, PushOptions, RecordFilter, SyncCursor,
};
use scalebench::service::{ServiceConfig, ServiceError, ServiceHandle};
use scalebench::{aggregate, Family, Metric, RunRecord};

use config::{Config, RunnerChoice, CONFIG_ENV, DEFAULT_CONFIG};

const ENDPOINT_ENV: &str = "SB_ENDPOINT";
const TOKEN_ENV: &str = "SB_TOKEN";

#[derive(Parser)]
#[command(name = "scalebench", version, about = "Scaling benchmarks for scientific applications")]
struct Cli {
    /// Configuration file [default: $SB_CONFIG or ./scalebench.toml]
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a starter configuration file
    Init(InitArgs),
    /// Run a benchmark case over a node list and append the records
    Run(RunArgs),
    /// Send local records to a results service
    Push(PushArgs),
    /// Start the results service
    Serve(ServeArgs),
    /// Write a CSV table and SVG chart for one metric
    Report(ReportArgs),
    /// Run the built-in LU kernel once and print its result as JSON
    Kernel(KernelArgs),
}

#[derive(Args)]
struct InitArgs {
    /// Where to write the file [default: the --config path]
    path: Option<PathBuf>,
    /// Overwrite an existing file
    #[arg(long)]
    force: bool,
    /// Site id [default: this host's name]
    #[arg(long)]
    site: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: String,
    /// Disambiguates cases that share a name
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, value_enum)]
    runner: Option<RunnerChoice>,
    /// Comma-separated, strictly increasing node counts
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<u32>>,
    #[arg(long)]
    ppn: Option<u32>,
    #[arg(long)]
    reps: Option<u32>,
    /// Overrides the configured site id
    #[arg(long)]
    site: Option<String>,
    /// Replay fixture root
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    scheduler: Option<Scheduler>,
    /// Directory for batch scripts and their outputs
    #[arg(long)]
    scripts: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct PushArgs {
    /// Service base URL [env: SB_ENDPOINT]
    #[arg(long)]
    endpoint: Option<String>,
    /// Bearer token [env: SB_TOKEN]
    #[arg(long)]
    token: Option<String>,
    /// Send every record, including ones already pushed
    #[arg(long)]
    all: bool,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address; SB_PORT overrides the port
    #[arg(long)]
    listen: Option<String>,
    /// Service data file
    #[arg(long)]
    data: Option<PathBuf>,
    /// Accepted bearer token (repeatable)
    #[arg(long = "token")]
    tokens: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// `local` or a service URL
    #[arg(long, default_value = "local")]
    source: String,
    #[arg(long)]
    metric: Metric,
    #[arg(long)]
    case: String,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    ppn: Option<u32>,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Init(args) => cmd_init(cli.config, args),
        Command::Run(args) => cmd_run(cli.config, args),
        Command::Push(args) => cmd_push(cli.config, args),
        Command::Serve(args) => cmd_serve(cli.config, args),
        Command::Report(args) => cmd_report(cli.config, args),
        Command::Kernel(args) => cmd_kernel(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn config_path(flag: Option<PathBuf>) -> (PathBuf, bool) {
    match flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
        Some(p) => (p, true),
        None => (PathBuf::from(DEFAULT_CONFIG), false),
    }
}

/// Loads the configuration. A missing file is an error only when a path
/// was given explicitly.
fn load_config(flag: Option<PathBuf>) -> Result<Option<Config>, Failure> {
    let (path, explicit) = config_path(flag);
    if !explicit && !path.exists() {
        return Ok(None);
    }
    Config::load(&path).map(Some).map_err(usage)
}

fn require_config(flag: Option<PathBuf>) -> Result<Config, Failure> {
    load_config(flag)?.ok_or_else(|| usage(anyhow!("no {DEFAULT_CONFIG} here; create one with `scalebench init`")))
}

fn store_path(flag: Option<PathBuf>, config: Option<&Config>) -> PathBuf {
    match (flag, config) {
        (Some(p), _) => p,
        (None, Some(c)) => c.resolve(&c.store),
        (None, None) => scalebench::resultstore::DEFAULT_STORE.into(),
    }
}

fn sanitize_site_id(raw: &str) -> String {
    let id: String =
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' }).collect();
    if id.is_empty() {
        "my-site".into()
    } else {
        id
    }
}

fn cmd_init(config: Option<PathBuf>, args: InitArgs) -> CmdResult {
    let path = args.path.unwrap_or_else(|| config_path(config).0);
    if path.exists() && !args.force {
        return Err(usage(anyhow!("{} already exists (use --force to overwrite)", path.display())));
    }
    let site = args.site.unwrap_or_else(|| sanitize_site_id(&capture_environment()["hostname"]));
    let text = config::template(&site);
    Config::parse(&text, Path::new(".")).map_err(usage)?;
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())).map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn make_runner(config: &Config, args: &RunArgs) -> Result<Box<dyn Runner>, Failure> {
    let d = &config.defaults;
    let runner: Box<dyn Runner> = match args.runner.unwrap_or(d.runner) {
        RunnerChoice::Local => {
            let exe = std::env::current_exe().context("locating own executable").map_err(runtime)?;
            Box::new(LocalRunner::new(exe, config.resolve(&d.work_dir)).with_template_root(&config.base_dir))
        }
        RunnerChoice::Replay => {
            let root = args.fixtures.clone().unwrap_or_else(|| config.resolve(&d.fixtures));
            Box::new(ReplayRunner::new(root))
        }
        RunnerChoice::BatchScript => {
            let dir = args.scripts.clone().unwrap_or_else(|| config.resolve(&d.scripts));
            let exe = std::env::current_exe().context("locating own executable").map_err(runtime)?;
            Box::new(BatchScriptRunner::new(dir, args.scheduler.unwrap_or(d.scheduler), exe))
        }
    };
    Ok(runner)
}

fn print_summary(report: &ExecutionReport) {
    println!(
        "{:<20} {:>6} {:>5} {:>4} {:>12} {:>12} {:>6}",
        "case", "nodes", "ppn", "rep", "seconds", "gflops", "passed"
    );
    for r in &report.records {
        let gflops = r.gflops.map(|g| format!("{g:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<20} {:>6} {:>5} {:>4} {:>12.4} {:>12} {:>6}",
            r.case_name,
            r.nodes,
            r.ppn,
            r.metadata.get("repetition").map(String::as_str).unwrap_or("0"),
            r.runtime_seconds,
            gflops,
            if r.passed { "yes" } else { "no" },
        );
    }
}

fn cmd_run(config: Option<PathBuf>, args: RunArgs) -> CmdResult {
    let mut config = require_config(config)?;
    if let Some(site) = &args.site {
        config.site.id = site.clone();
        config.site.validate().map_err(usage)?;
    }
    let case = config.find_case(&args.case, args.family).map_err(usage)?.clone();
    let d = &config.defaults;
    let nodes = args.nodes.clone().unwrap_or_else(|| d.node_list.clone());
    let plan =
        plan_runs(case, config.site.clone(), &nodes, args.ppn.unwrap_or(d.ppn), args.reps.unwrap_or(d.repetitions))
            .map_err(usage)?;
    let runner = make_runner(&config, &args)?;
    let report = execute_plan(&plan, runner.as_ref());

    let store = store_path(args.store.clone(), Some(&config));
    if !report.records.is_empty() {
        if let Some(parent) = store.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))
                .map_err(runtime)?;
        }
        append_many(&report.records, &store).map_err(runtime)?;
    }
    print_summary(&report);
    println!("{} record(s) appended to {}", report.records.len(), store.display());

    let pending = report.pending();
    if pending > 0 {
        println!("{pending} batch job(s) pending; submit the scripts and rerun to collect");
    }
    let failed: Vec<_> = report.failures.iter().filter(|f| !f.pending).collect();
    for f in &failed {
        eprintln!("{f}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(runtime(anyhow!("{} of {} run(s) failed", failed.len(), plan.configs().len())))
    }
}

fn setting(flag: Option<String>, env: &str, configured: Option<&String>) -> Option<String> {
    flag.or_else(|| std::env::var(env).ok().filter(|v| !v.is_empty())).or_else(|| configured.cloned())
}

fn cmd_push(config: Option<PathBuf>, args: PushArgs) -> CmdResult {
    let config = load_config(config)?;
    let remote = config.as_ref().map(|c| &c.remote);
    let endpoint = setting(args.endpoint, ENDPOINT_ENV, remote.and_then(|r| r.endpoint.as_ref()))
        .ok_or_else(|| usage(anyhow!("no endpoint: pass --endpoint or set {ENDPOINT_ENV}")))?;
    let token = setting(args.token, TOKEN_ENV, remote.and_then(|r| r.token.as_ref()))
        .ok_or_else(|| usage(anyhow!("no token: pass --token or set {TOKEN_ENV}")))?;

    let store = store_path(args.store, config.as_ref());
    let loaded = load_local(&store, &RecordFilter::default()).map_err(runtime)?;
    if loaded.skipped > 0 {
        eprintln!("warning: skipped {} unreadable line(s) in {}", loaded.skipped, store.display());
    }
    let cursor = SyncCursor::for_store(&store);
    let records: Vec<RunRecord> = if args.all {
        loaded.records
    } else {
        let pushed = cursor.pushed_ids().map_err(runtime)?;
        loaded.records.into_iter().filter(|r| !pushed.contains(&r.record_id)).collect()
    };
    if records.is_empty() {
        println!("nothing to push");
        return Ok(());
    }

    let mut cursor_error = None;
    let result = push_with(&records, &endpoint, &token, &PushOptions::default(), |batch, resp| {
        let rejected: BTreeSet<usize> = resp.rejections.iter().map(|r| r.index).collect();
        let ids = batch.iter().enumerate().filter(|(i, _)| !rejected.contains(i)).map(|(_, r)| r.record_id.as_str());
        if let Err(e) = cursor.mark_pushed(ids) {
            cursor_error.get_or_insert(e);
        }
    });
    if let Some(e) = cursor_error {
        eprintln!("warning: could not update {}: {e}", cursor.path().display());
    }
    let summary = match result {
        Ok(s) => s,
        Err(e) => {
            let p = e.progress();
            if p.requests > 0 {
                eprintln!("{} record(s) sent before the failure", p.records_sent);
            }
            let hint = matches!(e, PushError::Auth { .. }).then_some(" (check the token)").unwrap_or("");
            return Err(runtime(anyhow!("{e}{hint}")));
        }
    };
    println!(
        "pushed {} record(s) in {} request(s): accepted={} duplicates={} rejected={}",
        summary.records_sent, summary.requests, summary.accepted, summary.duplicates, summary.rejected
    );
    if summary.rejected > 0 {
        return Err(runtime(anyhow!("{} record(s) rejected by the service", summary.rejected)));
    }
    Ok(())
}

fn cmd_serve(config: Option<PathBuf>, args: ServeArgs) -> CmdResult {
    let config = load_config(config)?;
    let mut service = match &config {
        Some(c) => ServiceConfig { data: c.resolve(&c.service.data), ..c.service.clone() },
        None => ServiceConfig::default(),
    };
    if let Some(listen) = args.listen {
        service.listen = listen;
    }
    if let Some(data) = args.data {
        service.data = data;
    }
    if !args.tokens.is_empty() {
        service.tokens = args.tokens;
    }
    if service.tokens.is_empty() {
        eprintln!("warning: no tokens configured; every submission will be rejected");
    }
    let handle = ServiceHandle::start(&service).map_err(|e| match e {
        ServiceError::Bind { .. } | ServiceError::Address(_) => usage(e),
        other => runtime(other),
    })?;
    println!("listening on {}", handle.addr());
    eprintln!("{} record(s) loaded from {}", handle.service().record_count(), service.data.display());
    handle.run_until_signal().map_err(runtime)?;
    eprintln!("stopped");
    Ok(())
}

fn cmd_report(config: Option<PathBuf>, args: ReportArgs) -> CmdResult {
    let filter = RecordFilter {
        family: args.family,
        case_name: Some(args.case.clone()),
        ppn: args.ppn,
        ..RecordFilter::default()
    };
    let (points, warnings) = if args.source == "local" {
        let config = load_config(config)?;
        let store = store_path(args.store, config.as_ref());
        let loaded = load_local(&store, &filter).map_err(runtime)?;
        if loaded.skipped > 0 {
            eprintln!("warning: skipped {} unreadable line(s) in {}", loaded.skipped, store.display());
        }
        let agg = aggregate(&loaded.records, args.metric);
        (agg.points, agg.warnings)
    } else if args.source.starts_with("http://") || args.source.starts_with("https://") {
        let resp = fetch_series(&args.source, args.metric, &filter).map_err(runtime)?;
        (resp.points, resp.warnings)
    } else {
        return Err(usage(anyhow!("--source must be `local` or an http(s) URL, got {:?}", args.source)));
    };

    for w in &warnings {
        eprintln!(
            "warning: {} {} nodes={} ppn={}: {}",
            w.key.site_id, w.key.case_name, w.key.nodes, w.key.ppn, w.reason
        );
    }
    if points.is_empty() {
        return Err(runtime(anyhow!("no {} points for case {:?}", args.metric, args.case)));
    }
    let series = build_series(&points).map_err(runtime)?;
    let (csv, svg) = write_report(&args.out, &args.case, args.metric, &series).map_err(runtime)?;
    println!("{}", csv.display());
    println!("{}", svg.display());
    Ok(())
}

fn cmd_kernel(args: KernelArgs) -> CmdResult {
    if args.n == 0 {
        return Err(usage(anyhow!("--n must be positive")));
    }
    let result = run_builtin_linpack(args.n, args.seed).map_err(runtime)?;
    println!("{}", serde_json::to_string(&result).map_err(runtime)?);
    Ok(())
}
